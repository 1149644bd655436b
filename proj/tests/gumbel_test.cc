#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "remark/error.h"
#include "remark/model.h"
#include "remark/rng.h"

namespace remark {
namespace {

DistributionSequence row(std::vector<float> values) {
  DistributionSequence d(1, static_cast<nn::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    d(0, static_cast<nn::Index>(i)) = values[i];
  }
  return d;
}

DistributionSequence random_distribution(nn::Index rows, nn::Index cols,
                                         Rng& rng) {
  DistributionSequence d(rows, cols);
  for (nn::Index r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (nn::Index c = 0; c < cols; ++c) {
      d(r, c) = static_cast<float>(rng.uniform_open());
      sum += d(r, c);
    }
    d.row(r) /= static_cast<float>(sum);
  }
  return d;
}

TEST(GumbelSoftmax, RowsSumToOneAcrossTemperatures) {
  Rng rng(5);
  const auto dist = random_distribution(6, 30, rng);
  for (double tau : {0.01, 0.05, 0.3, 1.0, 2.0, 10.0}) {
    const auto out = gumbel_softmax(dist, tau, rng);
    for (nn::Index r = 0; r < out.rows(); ++r) {
      EXPECT_NEAR(out.row(r).cast<double>().sum(), 1.0, 1e-6) << "tau " << tau;
      EXPECT_GE(out.row(r).minCoeff(), 0.0f);
    }
  }
}

TEST(GumbelSoftmax, ZeroNoiseUnitTemperatureIsIdentity) {
  Rng rng(9);
  const auto dist = random_distribution(4, 17, rng);
  const auto out = gumbel_softmax(dist, 1.0, nn::Matrix<float>::Zero(4, 17));
  EXPECT_LE((out - dist).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(GumbelSoftmax, LowTemperatureMatchesClosedForm) {
  // softmax(log p / 0.1) = p^10 / sum p^10.
  const std::vector<long double> p = {0.7L, 0.2L, 0.1L};
  long double z = 0.0L;
  for (auto v : p) z += std::pow(v, 10.0L);
  const auto out = gumbel_softmax(row({0.7f, 0.2f, 0.1f}), 0.1,
                                  nn::Matrix<float>::Zero(1, 3));
  for (int i = 0; i < 3; ++i) {
    const double expected = static_cast<double>(std::pow(p[i], 10.0L) / z);
    EXPECT_NEAR(out(0, i), expected, 1e-6) << i;
  }
  EXPECT_NEAR(out(0, 0), 0.99999637, 1e-6);
}

TEST(GumbelSoftmax, SharpensMonotonicallyAsTemperatureFalls) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto dist = random_distribution(1, 8, rng);
    // Force a log-space margin above 0.1 for the leading entry.
    nn::Index arg = 0;
    dist.row(0).maxCoeff(&arg);
    dist(0, arg) *= 1.5f;
    dist.row(0) /= dist.row(0).sum();
    nn::Matrix<float> noise(1, 8);
    for (nn::Index c = 0; c < 8; ++c) noise(0, c) = static_cast<float>(rng.gumbel());
    std::vector<double> perturbed(8);
    for (nn::Index c = 0; c < 8; ++c) {
      perturbed[static_cast<std::size_t>(c)] = std::log(dist(0, c)) + noise(0, c);
    }
    std::sort(perturbed.begin(), perturbed.end(), std::greater<>());
    const double margin = perturbed[0] - perturbed[1];
    double previous = 0.0;
    for (double tau = 10.0; tau >= 0.01; tau *= 0.8) {
      const double peak = gumbel_softmax(dist, tau, noise).row(0).maxCoeff();
      EXPECT_GE(peak, previous - 1e-7);
      previous = peak;
    }
    if (margin > 0.1) {
      EXPECT_GT(gumbel_softmax(dist, 0.01, noise).row(0).maxCoeff(), 0.99f);
    }
  }
}

TEST(GumbelSoftmax, RejectsBadArguments) {
  const auto d = row({0.5f, 0.5f});
  EXPECT_THROW(gumbel_softmax(d, 0.0, nn::Matrix<float>::Zero(1, 2)), Error);
  EXPECT_THROW(gumbel_softmax(d, 1.0, nn::Matrix<float>::Zero(2, 2)), Error);
}

TEST(GumbelSoftmax, ZeroProbabilitiesAreFloored) {
  const auto out = gumbel_softmax(row({1.0f, 0.0f}), 1.0,
                                  nn::Matrix<float>::Zero(1, 2));
  EXPECT_TRUE(std::isfinite(out(0, 1)));
  EXPECT_NEAR(out(0, 1), 1e-9, 1e-12);
}

}  // namespace
}  // namespace remark
