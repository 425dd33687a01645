#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmlab/losses.hpp"
#include "cmlab/rng.hpp"
#include "cmlab/vec.hpp"

namespace cmlab {

// Two seeded Gaussian blobs in the plane: class 0 around (1.5, 1.5), class 1
// around (-1.5, -1.5), unit covariance, n/2 samples each.
struct BlobDataset {
  std::vector<std::array<double, 2>> x;
  std::vector<int> y;

  static std::shared_ptr<const BlobDataset> make(std::uint64_t seed, int n_samples) {
    auto data = std::make_shared<BlobDataset>();
    SplitMix64 rng(seed);
    const int n0 = n_samples / 2;
    data->x.reserve(n_samples);
    data->y.reserve(n_samples);
    for (int i = 0; i < n0; ++i) {
      data->x.push_back({1.5 + rng.normal(), 1.5 + rng.normal()});
      data->y.push_back(0);
    }
    for (int i = n0; i < n_samples; ++i) {
      data->x.push_back({-1.5 + rng.normal(), -1.5 + rng.normal()});
      data->y.push_back(1);
    }
    return data;
  }
};

// Full-batch softmax cross-entropy of a 2-H-2 tanh network on a blob dataset.
// Parameter layout: W1 (H x 2, row-major), b1 (H), W2 (2 x H, row-major), b2 (2).
// The gradient is computed by analytic backpropagation. An instance may be
// restricted to a subset of sample indices, which is how m-sharpness batches
// are formed.
class MlpLoss final : public LossSurface {
 public:
  MlpLoss(std::uint64_t data_seed, int n_samples, int hidden)
      : MlpLoss(BlobDataset::make(data_seed, n_samples), hidden, {}) {
    if (n_samples < 2) throw std::invalid_argument("mlp: n_samples must be >= 2");
    if (hidden < 1) throw std::invalid_argument("mlp: hidden must be >= 1");
  }

  MlpLoss(std::shared_ptr<const BlobDataset> data, int hidden, std::vector<int> subset)
      : data_(std::move(data)), hidden_(hidden), subset_(std::move(subset)) {}

  std::string name() const override { return "mlp"; }
  int dim() const override { return 5 * hidden_ + 2; }
  std::array<double, 2> domain_bounds() const override { return {-1.0, 1.0}; }
  int n_active_samples() const {
    return subset_.empty() ? static_cast<int>(data_->x.size()) : static_cast<int>(subset_.size());
  }

  // Seeded disjoint partition of the dataset into n_batches sub-losses.
  std::vector<std::shared_ptr<const LossSurface>> batches(int n_batches, std::uint64_t seed) const {
    const int n = static_cast<int>(data_->x.size());
    if (n_batches < 1 || n_batches > n)
      throw std::invalid_argument("mlp: n_batches must be in [1, n_samples]");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    SplitMix64 rng(seed);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next() % static_cast<std::uint64_t>(i + 1));
      std::swap(idx[i], idx[j]);
    }
    std::vector<std::shared_ptr<const LossSurface>> out;
    out.reserve(n_batches);
    int pos = 0;
    for (int b = 0; b < n_batches; ++b) {
      const int count = n / n_batches + (b < n % n_batches ? 1 : 0);
      std::vector<int> part(idx.begin() + pos, idx.begin() + pos + count);
      pos += count;
      out.push_back(std::make_shared<MlpLoss>(data_, hidden_, std::move(part)));
    }
    return out;
  }

 private:
  int sample_index(int k) const { return subset_.empty() ? k : subset_[k]; }

  double value_impl(const Vec& t) const override {
    const int h = hidden_;
    const double* w1 = t.data();
    const double* b1 = w1 + 2 * h;
    const double* w2 = b1 + h;
    const double* b2 = w2 + 2 * h;
    const int n = n_active_samples();
    double total = 0.0;
    std::vector<double> a1(h);
    for (int k = 0; k < n; ++k) {
      const auto& x = data_->x[sample_index(k)];
      const int label = data_->y[sample_index(k)];
      for (int j = 0; j < h; ++j)
        a1[j] = std::tanh(w1[2 * j] * x[0] + w1[2 * j + 1] * x[1] + b1[j]);
      double z[2] = {b2[0], b2[1]};
      for (int j = 0; j < h; ++j) {
        z[0] += w2[j] * a1[j];
        z[1] += w2[h + j] * a1[j];
      }
      const double m = std::max(z[0], z[1]);
      const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
      total += lse - z[label];
    }
    return total / n;
  }

  Vec gradient_impl(const Vec& t) const override {
    const int h = hidden_;
    const double* w1 = t.data();
    const double* b1 = w1 + 2 * h;
    const double* w2 = b1 + h;
    const double* b2 = w2 + 2 * h;
    const int n = n_active_samples();
    Vec g(t.size(), 0.0);
    double* gw1 = g.data();
    double* gb1 = gw1 + 2 * h;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + 2 * h;
    std::vector<double> a1(h);
    for (int k = 0; k < n; ++k) {
      const auto& x = data_->x[sample_index(k)];
      const int label = data_->y[sample_index(k)];
      for (int j = 0; j < h; ++j)
        a1[j] = std::tanh(w1[2 * j] * x[0] + w1[2 * j + 1] * x[1] + b1[j]);
      double z[2] = {b2[0], b2[1]};
      for (int j = 0; j < h; ++j) {
        z[0] += w2[j] * a1[j];
        z[1] += w2[h + j] * a1[j];
      }
      const double m = std::max(z[0], z[1]);
      const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
      const double d0 = e0 / (e0 + e1) - (label == 0 ? 1.0 : 0.0);
      const double d1 = e1 / (e0 + e1) - (label == 1 ? 1.0 : 0.0);
      gb2[0] += d0;
      gb2[1] += d1;
      for (int j = 0; j < h; ++j) {
        gw2[j] += d0 * a1[j];
        gw2[h + j] += d1 * a1[j];
        const double da = w2[j] * d0 + w2[h + j] * d1;
        const double dz = da * (1.0 - a1[j] * a1[j]);
        gw1[2 * j] += dz * x[0];
        gw1[2 * j + 1] += dz * x[1];
        gb1[j] += dz;
      }
    }
    for (double& v : g) v /= n;
    return g;
  }

  std::shared_ptr<const BlobDataset> data_;
  int hidden_;
  std::vector<int> subset_;  // empty means the full dataset
};

inline std::unique_ptr<LossSurface> make_mlp_loss(std::uint64_t data_seed, int n_samples,
                                                  int hidden) {
  return std::make_unique<MlpLoss>(data_seed, n_samples, hidden);
}

}  // namespace cmlab
