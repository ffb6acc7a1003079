#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "msstrn/dense_array.hpp"

namespace msstrn::data {

// L x N flow readings, one row per sampling interval.
struct TrafficSeries {
  DenseArray values;
  int interval_minutes = 5;
  std::vector<std::string> node_ids;

  std::size_t length() const { return values.dim(0); }
  std::size_t nodes() const { return values.dim(1); }
};

struct ZScore {
  double mean = 0.0;
  double std = 1.0;

  // Floors the standard deviation at 1e-8.
  static ZScore fit(std::span<const double> values);
  double normalize(double x) const { return (x - mean) / std; }
  double denormalize(double z) const { return z * std + mean; }
  DenseArray normalize(const DenseArray& a) const;
  DenseArray denormalize(const DenseArray& a) const;
};

struct NormalizedSeries {
  TrafficSeries series;
  ZScore stats;
};

// Fits global statistics over rows [0, fit_rows) (all rows when 0) and
// normalizes the whole series with them.
NormalizedSeries zscore(const TrafficSeries& series, std::size_t fit_rows = 0);

// Sliding windows of stride 1: inputs M x T x N x 1 in normalized units,
// targets M x T' x N x 1 in original units.
struct SampleSet {
  std::size_t input_steps = 0;
  std::size_t horizon = 0;
  std::size_t nodes = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  ZScore stats;

  std::size_t size() const;
  // Contiguous samples [begin, end) as dense batches.
  DenseArray input_batch(std::size_t begin, std::size_t end) const;
  DenseArray target_batch(std::size_t begin, std::size_t end) const;
  DenseArray input_batch(std::span<const std::size_t> indices) const;
  DenseArray target_batch(std::span<const std::size_t> indices) const;
  SampleSet slice(std::size_t begin, std::size_t end) const;
};

// Number of windows a series of length L yields (0 when L < T + T').
std::size_t window_count(std::size_t length, std::size_t input_steps, std::size_t horizon);

SampleSet window_split(const TrafficSeries& series, std::size_t input_steps, std::size_t horizon,
                       const ZScore& stats = {});

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

// floor(M*train), floor(M*val), remainder.
std::array<std::size_t, 3> split_sizes(std::size_t samples, const SplitRatios& ratios = {});

struct DataSplit {
  SampleSet train;
  SampleSet val;
  SampleSet test;
};

DataSplit chrono_split(const SampleSet& samples, const SplitRatios& ratios = {});

// Windows, splits chronologically and normalizes with statistics fitted on
// the raw rows covered by the training windows.
DataSplit prepare_dataset(const TrafficSeries& series, std::size_t input_steps, std::size_t horizon,
                          const SplitRatios& ratios = {});

// CSV: header of node ids, then one row of N readings per interval.
TrafficSeries load_series(const std::filesystem::path& path);
TrafficSeries parse_series(const std::string& text);
void write_series(const std::filesystem::path& path, const TrafficSeries& series);

struct SynthOptions {
  std::size_t nodes = 8;
  std::size_t length = 2000;
  double coupling = 0.5;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
};

// Period of the synthetic diurnal cycle, in steps (one day of 5-minute readings).
inline constexpr double kSynthPeriod = 288.0;

// Closed-form base signal of node n at step t.
double synth_base(std::size_t node, std::size_t nodes, double t);

// value[t,n] = base_n(t) + coupling * mean(base_{n-1}(t-1), base_{n+1}(t-1)) + noise
// on a ring of nodes; deterministic for a seed.
TrafficSeries synth_generate(const SynthOptions& options);

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent; NaN when every truth entry is masked
  bool mape_defined = true;
};

Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth, double mask_eps = 1e-3);

}  // namespace msstrn::data
