#include "irregts/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "irregts/errors.hpp"
#include "json.hpp"

namespace irregts::data {

using nlohmann::json;

void validate_series(const TimeSeries& s, int num_classes, int feature_dim) {
  if (s.timestamps.empty()) raise(ErrorKind::Validation, "series '" + s.id + "': no observations");
  if (s.timestamps.size() != s.observations.size())
    raise(ErrorKind::Validation, "series '" + s.id + "': timestamps/observations misaligned");
  long prev = -1;
  for (long t : s.timestamps) {
    if (t < 0) raise(ErrorKind::Validation, "series '" + s.id + "': negative timestamp");
    if (t <= prev) raise(ErrorKind::Validation, "series '" + s.id + "': timestamps not increasing");
    prev = t;
  }
  if (s.horizon < s.timestamps.back())
    raise(ErrorKind::Validation, "series '" + s.id + "': horizon before last observation");
  if (s.label < 0 || s.label >= num_classes)
    raise(ErrorKind::Validation, "series '" + s.id + "': label out of range");
  for (const Vec& x : s.observations) {
    if (static_cast<int>(x.size()) != feature_dim)
      raise(ErrorKind::Validation, "series '" + s.id + "': feature dim mismatch");
    if (!tensor::all_finite(x))
      raise(ErrorKind::Validation, "series '" + s.id + "': non-finite observation");
  }
}

void validate_dataset(const Dataset& ds) {
  if (ds.num_classes < 2) raise(ErrorKind::Validation, "dataset: need at least two classes");
  if (ds.feature_dim < 1) raise(ErrorKind::Validation, "dataset: need at least one feature");
  for (const TimeSeries& s : ds.series) validate_series(s, ds.num_classes, ds.feature_dim);
}

std::vector<ClassTemplate> default_templates(int num_classes, int feature_dim, long length,
                                             uint64_t seed) {
  // Classes share one amplitude profile and differ only in when the bump
  // peaks, so labels carry temporal rather than spectral information.
  std::vector<ClassTemplate> tpls;
  const double T = static_cast<double>(length);
  Rng rng(seed_mix(seed, "templates"));
  Vec amplitude(static_cast<size_t>(feature_dim));
  for (double& a : amplitude) {
    const double mag = rng.uniform(0.6, 1.4);
    a = rng.bernoulli(0.5) ? mag : -mag;
  }
  const double width = T * rng.uniform(0.10, 0.14);
  for (int k = 0; k < num_classes; ++k) {
    ClassTemplate tpl;
    const double frac =
        num_classes > 1 ? static_cast<double>(k) / static_cast<double>(num_classes - 1) : 0.5;
    tpl.peak = T * (0.25 + 0.5 * frac) + rng.uniform(-0.02, 0.02) * T;
    tpl.width = width;
    tpl.amplitude = amplitude;
    tpls.push_back(std::move(tpl));
  }
  return tpls;
}

double template_value(const ClassTemplate& tpl, long t, int feature) {
  const double d = (static_cast<double>(t) - tpl.peak) / tpl.width;
  return tpl.amplitude[static_cast<size_t>(feature)] * std::exp(-0.5 * d * d);
}

Dataset generate(const SynthSpec& spec) {
  if (spec.num_classes < 2 || spec.feature_dim < 1 || spec.length < 2 || spec.n_series < 1 ||
      spec.missing_rate < 0.0 || spec.missing_rate >= 1.0 || spec.noise_std < 0.0)
    raise(ErrorKind::Config, "generate: infeasible spec");

  std::vector<ClassTemplate> tpls =
      spec.templates.empty()
          ? default_templates(spec.num_classes, spec.feature_dim, spec.length, spec.seed)
          : spec.templates;
  if (static_cast<int>(tpls.size()) != spec.num_classes)
    raise(ErrorKind::Config, "generate: template count must match num_classes");
  for (const ClassTemplate& tpl : tpls)
    if (static_cast<int>(tpl.amplitude.size()) != spec.feature_dim)
      raise(ErrorKind::Config, "generate: template amplitude dim mismatch");

  // balanced labels within +-1, order shuffled from the spec seed
  std::vector<int> labels(spec.n_series);
  for (int i = 0; i < spec.n_series; ++i) labels[static_cast<size_t>(i)] = i % spec.num_classes;
  Rng shuffle_rng(seed_mix(spec.seed, "class-order"));
  shuffle(labels, shuffle_rng);

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.feature_dim = spec.feature_dim;
  ds.nominal_length = spec.length;
  ds.missing_rate = spec.missing_rate;
  ds.series.reserve(static_cast<size_t>(spec.n_series));

  for (int i = 0; i < spec.n_series; ++i) {
    // independent per-series stream so generation can be partitioned
    Rng rng(seed_mix(spec.seed, "series", static_cast<uint64_t>(i)));
    TimeSeries s;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "s%06d", i);
    s.id = buf;
    s.label = labels[static_cast<size_t>(i)];
    s.horizon = spec.length - 1;
    const ClassTemplate& tpl = tpls[static_cast<size_t>(s.label)];

    std::vector<char> keep(static_cast<size_t>(spec.length));
    for (;;) {
      bool any = false;
      for (long t = 0; t < spec.length; ++t) {
        keep[static_cast<size_t>(t)] = !rng.bernoulli(spec.missing_rate);
        any = any || keep[static_cast<size_t>(t)];
      }
      if (any) break;
    }
    for (long t = 0; t < spec.length; ++t) {
      if (!keep[static_cast<size_t>(t)]) continue;
      Vec x(static_cast<size_t>(spec.feature_dim));
      for (int j = 0; j < spec.feature_dim; ++j)
        x[static_cast<size_t>(j)] = template_value(tpl, t, j) + rng.normal(0.0, spec.noise_std);
      s.timestamps.push_back(t);
      s.observations.push_back(std::move(x));
    }
    ds.series.push_back(std::move(s));
  }
  return ds;
}

namespace {

json series_to_json(const TimeSeries& s) {
  json j;
  j["id"] = s.id;
  j["label"] = s.label;
  j["timestamps"] = s.timestamps;
  j["observations"] = s.observations;
  j["horizon"] = s.horizon;
  return j;
}

TimeSeries series_from_json(const json& j) {
  TimeSeries s;
  s.id = j.at("id").get<std::string>();
  s.label = j.at("label").get<int>();
  s.timestamps = j.at("timestamps").get<std::vector<long>>();
  s.observations = j.at("observations").get<std::vector<Vec>>();
  s.horizon = j.at("horizon").get<long>();
  return s;
}

}  // namespace

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ostringstream out;
  json header;
  header["version"] = 1;
  header["num_classes"] = ds.num_classes;
  header["feature_dim"] = ds.feature_dim;
  header["nominal_length"] = ds.nominal_length;
  header["missing_rate"] = ds.missing_rate;
  out << header.dump() << "\n";
  for (const TimeSeries& s : ds.series) out << series_to_json(s).dump() << "\n";

  // atomic: write a temp file next to the target, then rename
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(ErrorKind::Io, "cannot write '" + tmp + "'");
    f << out.str();
    if (!f) raise(ErrorKind::Io, "write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Dataset load_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  size_t lineno = 0;

  auto parse_line = [&](const std::string& text) -> json {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
      raise(ErrorKind::Parse, "' " + path + "' line " + std::to_string(lineno) + ": malformed JSON");
    return j;
  };

  if (!std::getline(f, line)) raise(ErrorKind::Parse, "'" + path + "' line 1: missing header");
  lineno = 1;
  json header = parse_line(line);
  Dataset ds;
  try {
    if (header.at("version").get<int>() != 1)
      raise(ErrorKind::Parse, "'" + path + "': unsupported version");
    ds.num_classes = header.at("num_classes").get<int>();
    ds.feature_dim = header.at("feature_dim").get<int>();
    ds.nominal_length = header.at("nominal_length").get<long>();
    ds.missing_rate = header.at("missing_rate").get<double>();
  } catch (const json::exception& e) {
    raise(ErrorKind::Parse, "'" + path + "' line 1: bad header (" + e.what() + ")");
  }

  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line);
    try {
      ds.series.push_back(series_from_json(j));
    } catch (const json::exception& e) {
      raise(ErrorKind::Parse,
            "'" + path + "' line " + std::to_string(lineno) + ": bad record (" + e.what() + ")");
    }
  }
  validate_dataset(ds);
  return ds;
}

Splits split(const Dataset& ds, const SplitFractions& fr, uint64_t seed) {
  const double total = fr.train + fr.val + fr.test;
  if (std::fabs(total - 1.0) > 1e-9) raise(ErrorKind::Config, "split: fractions must sum to 1");
  std::vector<size_t> order(ds.series.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed_mix(seed, "split"));
  shuffle(order, rng);

  const size_t n = order.size();
  const auto count = [n](double f) {
    return static_cast<size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const size_t n_train = count(fr.train);
  const size_t n_val = count(fr.val);

  Splits out;
  for (Dataset* part : {&out.train, &out.val, &out.test}) {
    part->num_classes = ds.num_classes;
    part->feature_dim = ds.feature_dim;
    part->nominal_length = ds.nominal_length;
    part->missing_rate = ds.missing_rate;
  }
  for (size_t i = 0; i < n; ++i) {
    const TimeSeries& s = ds.series[order[i]];
    if (i < n_train)
      out.train.series.push_back(s);
    else if (i < n_train + n_val)
      out.val.series.push_back(s);
    else
      out.test.series.push_back(s);
  }
  return out;
}

TimeSeries truncate_leading(const TimeSeries& s, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    raise(ErrorKind::Config, "truncate_leading: fraction must be in (0,1]");
  const long T = s.horizon + 1;
  const long cutoff = static_cast<long>(std::floor(fraction * static_cast<double>(T) + 1e-9));
  TimeSeries out;
  out.id = s.id;
  out.label = s.label;
  out.horizon = s.horizon;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s.timestamps[i] < cutoff) {
      out.timestamps.push_back(s.timestamps[i]);
      out.observations.push_back(s.observations[i]);
    }
  }
  if (out.timestamps.empty())
    raise(ErrorKind::Empty, "truncate_leading: no observations before cutoff");
  return out;
}

TimeSeries sparsify(const TimeSeries& s, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    raise(ErrorKind::Config, "sparsify: fraction must be in (0,1]");
  const size_t n = s.size();
  size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  if (k < 1) k = 1;
  if (k >= n) return s;

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  // partial Fisher-Yates: first k entries are a uniform sample
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());

  TimeSeries out;
  out.id = s.id;
  out.label = s.label;
  out.horizon = s.horizon;
  for (size_t i : idx) {
    out.timestamps.push_back(s.timestamps[i]);
    out.observations.push_back(s.observations[i]);
  }
  return out;
}

Dataset subset(const Dataset& ds, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    raise(ErrorKind::Config, "subset: fraction must be in (0,1]");
  const size_t n = ds.series.size();
  const size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  if (k == 0) raise(ErrorKind::Empty, "subset: empty result");
  if (k >= n) return ds;

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());

  Dataset out;
  out.num_classes = ds.num_classes;
  out.feature_dim = ds.feature_dim;
  out.nominal_length = ds.nominal_length;
  out.missing_rate = ds.missing_rate;
  for (size_t i : idx) out.series.push_back(ds.series[i]);
  return out;
}

Vec feature_means(const Dataset& ds) {
  Vec mean(static_cast<size_t>(ds.feature_dim), 0.0);
  size_t count = 0;
  for (const TimeSeries& s : ds.series)
    for (const Vec& x : s.observations) {
      for (size_t j = 0; j < mean.size(); ++j) mean[j] += x[j];
      ++count;
    }
  if (count > 0)
    for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

}  // namespace irregts::data
