#include "msstrn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string_view>

#include "msstrn/errors.hpp"

namespace msstrn::data {

ZScore ZScore::fit(std::span<const double> values) {
  if (values.empty()) throw ShapeError("zscore: no values to fit");
  double total = 0.0;
  for (double v : values) total += v;
  const double mean = total / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double std = std::sqrt(sq / static_cast<double>(values.size()));
  return {mean, std::max(std, 1e-8)};
}

DenseArray ZScore::normalize(const DenseArray& a) const {
  DenseArray out = a;
  for (double& v : out.data()) v = normalize(v);
  return out;
}

DenseArray ZScore::denormalize(const DenseArray& a) const {
  DenseArray out = a;
  for (double& v : out.data()) v = denormalize(v);
  return out;
}

NormalizedSeries zscore(const TrafficSeries& series, std::size_t fit_rows) {
  const std::size_t rows = fit_rows == 0 ? series.length() : std::min(fit_rows, series.length());
  const auto all = series.values.data();
  const ZScore stats = ZScore::fit(all.first(rows * series.nodes()));
  NormalizedSeries out{series, stats};
  out.series.values = stats.normalize(series.values);
  return out;
}

std::size_t SampleSet::size() const {
  const std::size_t per = input_steps * nodes;
  return per == 0 ? 0 : inputs.size() / per;
}

namespace {

DenseArray gather(const std::vector<double>& src, std::size_t steps, std::size_t nodes,
                  std::span<const std::size_t> indices, std::size_t total) {
  if (indices.empty()) throw ShapeError("empty batch");
  const std::size_t per = steps * nodes;
  DenseArray out({indices.size(), steps, nodes, 1});
  auto dst = out.data();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= total) throw ShapeError("sample index " + std::to_string(indices[b]) + " out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[b] * per), per,
                dst.begin() + static_cast<std::ptrdiff_t>(b * per));
  }
  return out;
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
  if (end <= begin) throw ShapeError("empty sample range");
  std::vector<std::size_t> out(end - begin);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = begin + i;
  return out;
}

}  // namespace

DenseArray SampleSet::input_batch(std::span<const std::size_t> indices) const {
  return gather(inputs, input_steps, nodes, indices, size());
}

DenseArray SampleSet::target_batch(std::span<const std::size_t> indices) const {
  return gather(targets, horizon, nodes, indices, size());
}

DenseArray SampleSet::input_batch(std::size_t begin, std::size_t end) const {
  return input_batch(iota_range(begin, end));
}

DenseArray SampleSet::target_batch(std::size_t begin, std::size_t end) const {
  return target_batch(iota_range(begin, end));
}

SampleSet SampleSet::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ShapeError("sample slice out of range");
  SampleSet out;
  out.input_steps = input_steps;
  out.horizon = horizon;
  out.nodes = nodes;
  out.stats = stats;
  const std::size_t in_per = input_steps * nodes, out_per = horizon * nodes;
  out.inputs.assign(inputs.begin() + static_cast<std::ptrdiff_t>(begin * in_per),
                    inputs.begin() + static_cast<std::ptrdiff_t>(end * in_per));
  out.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(begin * out_per),
                     targets.begin() + static_cast<std::ptrdiff_t>(end * out_per));
  return out;
}

std::size_t window_count(std::size_t length, std::size_t input_steps, std::size_t horizon) {
  if (length < input_steps + horizon) return 0;
  return length - input_steps - horizon + 1;
}

SampleSet window_split(const TrafficSeries& series, std::size_t input_steps, std::size_t horizon,
                       const ZScore& stats) {
  if (input_steps == 0 || horizon == 0) throw ConfigError("window lengths must be positive");
  SampleSet out;
  out.input_steps = input_steps;
  out.horizon = horizon;
  out.nodes = series.nodes();
  out.stats = stats;
  const std::size_t m = window_count(series.length(), input_steps, horizon);
  const std::size_t n = series.nodes();
  const auto v = series.values.data();
  out.inputs.reserve(m * input_steps * n);
  out.targets.reserve(m * horizon * n);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t t = 0; t < input_steps; ++t) {
      for (std::size_t j = 0; j < n; ++j) out.inputs.push_back(stats.normalize(v[(s + t) * n + j]));
    }
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t j = 0; j < n; ++j) out.targets.push_back(v[(s + input_steps + t) * n + j]);
    }
  }
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t samples, const SplitRatios& ratios) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  if (samples < 3) throw ShapeError("need at least 3 samples to split, got " + std::to_string(samples));
  const auto train = static_cast<std::size_t>(std::floor(static_cast<double>(samples) * ratios.train));
  const auto val = static_cast<std::size_t>(std::floor(static_cast<double>(samples) * ratios.val));
  return {train, val, samples - train - val};
}

DataSplit chrono_split(const SampleSet& samples, const SplitRatios& ratios) {
  const auto sizes = split_sizes(samples.size(), ratios);
  return {samples.slice(0, sizes[0]), samples.slice(sizes[0], sizes[0] + sizes[1]),
          samples.slice(sizes[0] + sizes[1], samples.size())};
}

DataSplit prepare_dataset(const TrafficSeries& series, std::size_t input_steps, std::size_t horizon,
                          const SplitRatios& ratios) {
  const std::size_t m = window_count(series.length(), input_steps, horizon);
  const auto sizes = split_sizes(m, ratios);
  const std::size_t train_rows = sizes[0] + input_steps + horizon - 1;
  const ZScore stats = zscore(series, train_rows).stats;
  return chrono_split(window_split(series, input_steps, horizon, stats), ratios);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

TrafficSeries parse_series(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("empty file", 1);

  TrafficSeries series;
  for (std::string_view id : split_fields(lines[0])) {
    id = trim(id);
    if (id.empty()) throw ParseError("empty node id in header", 1);
    series.node_ids.emplace_back(id);
  }
  const std::size_t n = series.node_ids.size();
  if (lines.size() < 2) throw ParseError("no data rows", 2);

  std::vector<double> values;
  values.reserve((lines.size() - 1) * n);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li]);
    if (fields.size() != n) {
      throw ParseError("expected " + std::to_string(n) + " values, found " + std::to_string(fields.size()), li + 1);
    }
    for (std::string_view f : fields) {
      f = trim(f);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("non-numeric cell '" + std::string(f) + "'", li + 1);
      }
      if (!std::isfinite(v)) throw ParseError("non-finite cell '" + std::string(f) + "'", li + 1);
      values.push_back(v);
    }
  }
  series.values = DenseArray({lines.size() - 1, n}, std::move(values));
  return series;
}

TrafficSeries load_series(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_series(buf.str());
}

void write_series(const std::filesystem::path& path, const TrafficSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const std::size_t n = series.nodes();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != 0) out << ',';
    out << (j < series.node_ids.size() ? series.node_ids[j] : std::to_string(j));
  }
  out << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  const auto v = series.values.data();
  for (std::size_t t = 0; t < series.length(); ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != 0) out << ',';
      out << v[t * n + j];
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

double synth_base(std::size_t node, std::size_t nodes, double t) {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(node) / static_cast<double>(nodes);
  return 2.0 + std::sin(2.0 * std::numbers::pi * t / kSynthPeriod + phase);
}

TrafficSeries synth_generate(const SynthOptions& options) {
  if (options.nodes == 0 || options.length == 0) throw ConfigError("synthetic series needs nodes and length >= 1");
  if (options.coupling < 0.0 || options.coupling > 1.0) throw ConfigError("coupling must lie in [0, 1]");
  if (options.noise_std < 0.0) throw ConfigError("noise_std must be non-negative");
  const std::size_t n = options.nodes;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  TrafficSeries series;
  series.values = DenseArray({options.length, n});
  for (std::size_t j = 0; j < n; ++j) series.node_ids.push_back("n" + std::to_string(j));
  auto v = series.values.data();
  for (std::size_t t = 0; t < options.length; ++t) {
    const double now = static_cast<double>(t);
    for (std::size_t j = 0; j < n; ++j) {
      const double left = synth_base((j + n - 1) % n, n, now - 1.0);
      const double right = synth_base((j + 1) % n, n, now - 1.0);
      double value = synth_base(j, n, now) + options.coupling * 0.5 * (left + right);
      if (options.noise_std > 0.0) value += options.noise_std * noise(rng);
      v[t * n + j] = value;
    }
  }
  return series;
}

Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth, double mask_eps) {
  if (pred.size() != truth.size()) {
    throw ShapeError("metrics: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) +
                     " truths");
  }
  if (pred.empty()) throw ShapeError("metrics: no values");
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(truth[i]) >= mask_eps) {
      pct_sum += std::abs(e / truth[i]);
      ++kept;
    }
  }
  const double count = static_cast<double>(pred.size());
  Metrics m;
  m.mae = abs_sum / count;
  m.rmse = std::sqrt(sq_sum / count);
  m.mape_defined = kept > 0;
  m.mape = kept > 0 ? 100.0 * pct_sum / static_cast<double>(kept) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

}  // namespace msstrn::data
