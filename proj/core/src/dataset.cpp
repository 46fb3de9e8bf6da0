#include "survbal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "survbal/error.hpp"
#include "survbal/rng.hpp"

namespace survbal {

TimeBins::TimeBins(std::vector<double> edges) : edges_(std::move(edges)) {
  for (std::size_t j = 0; j < edges_.size(); ++j) {
    if (!(edges_[j] > 0.0) || !std::isfinite(edges_[j]))
      throw ValidationError("bin edges must be finite and > 0");
    if (j > 0 && !(edges_[j] > edges_[j - 1]))
      throw ValidationError("bin edges must be strictly increasing");
  }
}

std::size_t TimeBins::bin_of(double t) const {
  return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), t) - edges_.begin());
}

double TimeBins::lower(std::size_t j) const { return j == 0 ? 0.0 : edges_[j - 1]; }

double TimeBins::upper(std::size_t j) const {
  if (j < edges_.size()) return edges_[j];
  if (edges_.empty()) return 1.0;
  const double last = edges_.back();
  const double prev = edges_.size() >= 2 ? edges_[edges_.size() - 2] : 0.0;
  return last + (last - prev);
}

Eigen::MatrixXd Dataset::covariates() const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t c = 0; c < dim(); ++c)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = instances[i].x[c];
  return X;
}

std::size_t Dataset::censored_count() const {
  return static_cast<std::size_t>(std::count_if(instances.begin(), instances.end(),
                                                [](const auto& s) { return s.censored(); }));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || cell.empty())
    throw ParseError("non-numeric cell '" + cell + "' in column '" + column + "' at row " +
                     std::to_string(row));
  return v;
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV input");
  const auto header = split_line(line);

  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto time_col = find(schema.time_column);
  const auto event_col = find(schema.event_column);
  if (!time_col) throw SchemaError("missing time column '" + schema.time_column + "'");
  if (!event_col) throw SchemaError("missing event column '" + schema.event_column + "'");
  const auto cost_col = find(schema.cost_column);
  const auto ttrue_col = find(schema.true_time_column);
  const auto dtrue_col = find(schema.true_event_column);
  if (ttrue_col.has_value() != dtrue_col.has_value())
    throw SchemaError("audit columns must appear together");

  Dataset ds;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == *time_col || c == *event_col || (cost_col && c == *cost_col) ||
        (ttrue_col && c == *ttrue_col) || (dtrue_col && c == *dtrue_col))
      continue;
    feature_cols.push_back(c);
    ds.feature_names.push_back(header[c]);
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    SurvivalInstance s;
    s.id = ds.instances.size();
    s.t_obs = parse_double(cells[*time_col], row, header[*time_col]);
    const double ev = parse_double(cells[*event_col], row, header[*event_col]);
    if (ev != 0.0 && ev != 1.0)
      throw ValidationError("event must be 0 or 1 at row " + std::to_string(row));
    s.delta_obs = ev == 1.0;
    if (s.t_obs < 0.0 || !std::isfinite(s.t_obs))
      throw ValidationError("negative or non-finite time at row " + std::to_string(row));
    if (ttrue_col) {
      s.t_true = parse_double(cells[*ttrue_col], row, header[*ttrue_col]);
      s.delta_true = parse_double(cells[*dtrue_col], row, header[*dtrue_col]) == 1.0;
      if (s.t_true < 0.0) throw ValidationError("negative t_true at row " + std::to_string(row));
    } else {
      s.t_true = s.t_obs;
      s.delta_true = s.delta_obs;
    }
    s.cost = cost_col ? parse_double(cells[*cost_col], row, header[*cost_col]) : 1.0;
    if (!(s.cost > 0.0)) throw ValidationError("cost must be > 0 at row " + std::to_string(row));
    s.x.reserve(feature_cols.size());
    for (auto c : feature_cols) s.x.push_back(parse_double(cells[c], row, header[c]));
    ds.instances.push_back(std::move(s));
  }
  validate(ds);
  if (schema.standardize && !ds.instances.empty()) standardize(ds);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  return read_csv(in, schema);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  out << "time,event,cost";
  for (const auto& f : ds.feature_names) out << ',' << f;
  out << ",t_true,delta_true\n";
  out << std::setprecision(17);
  for (const auto& s : ds.instances) {
    out << s.t_obs << ',' << (s.delta_obs ? 1 : 0) << ',' << s.cost;
    for (double v : s.x) out << ',' << v;
    out << ',' << s.t_true << ',' << (s.delta_true ? 1 : 0) << '\n';
  }
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(ds, out);
}

TimeBins make_bins(std::vector<double> times, std::size_t n) {
  if (n < 2) throw ValidationError("need at least 2 bins");
  if (times.empty()) throw DegenerateBinError("no event times to bin");
  std::sort(times.begin(), times.end());
  std::vector<double> uniq = times;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < n)
    throw DegenerateBinError("only " + std::to_string(uniq.size()) + " distinct event times for " +
                             std::to_string(n) + " bins");

  std::vector<double> edges;
  edges.reserve(n - 1);
  const double last = static_cast<double>(times.size() - 1);
  for (std::size_t j = 1; j < n; ++j) {
    const double pos = last * static_cast<double>(j) / static_cast<double>(n);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, times.size() - 1);
    double q = times[lo] + (pos - static_cast<double>(lo)) * (times[hi] - times[lo]);
    const double floor_v = edges.empty() ? 0.0 : edges.back();
    if (!(q > floor_v)) q = std::nextafter(floor_v, std::numeric_limits<double>::infinity());
    edges.push_back(q);
  }
  return TimeBins(std::move(edges));
}

TimeBins make_bins(const Dataset& ds, std::size_t n) {
  std::vector<double> ev;
  for (const auto& s : ds.instances)
    if (s.delta_true) ev.push_back(s.t_true);
  return make_bins(std::move(ev), n);
}

void standardize(Dataset& fit_on, std::vector<Dataset*> also) {
  const std::size_t d = fit_on.dim();
  const auto n = static_cast<double>(fit_on.size());
  if (fit_on.size() == 0) return;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (const auto& s : fit_on.instances) mean += s.x[c];
    mean /= n;
    double var = 0.0;
    for (const auto& s : fit_on.instances) var += (s.x[c] - mean) * (s.x[c] - mean);
    const double sd = std::max(std::sqrt(var / n), kStdFloor);
    auto apply = [&](Dataset& ds) {
      for (auto& s : ds.instances) {
        const double z = (s.x[c] - mean) / sd;
        s.x[c] = std::abs(z) < 1e-300 ? 0.0 : z;
      }
    };
    apply(fit_on);
    for (auto* o : also) apply(*o);
  }
}

Split train_test_split(const Dataset& ds, double train_fraction, std::uint64_t seed,
                       std::size_t n_bins) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must be in (0, 1)");
  auto rng = make_rng({seed, 0x5917});
  std::vector<std::size_t> events, censored;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (ds.instances[i].delta_true ? events : censored).push_back(i);
  std::shuffle(events.begin(), events.end(), rng);
  std::shuffle(censored.begin(), censored.end(), rng);

  Split out;
  out.train.feature_names = out.test.feature_names = ds.feature_names;
  auto take = [&](const std::vector<std::size_t>& idx) {
    const auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t r = 0; r < idx.size(); ++r)
      (r < k ? out.train : out.test).instances.push_back(ds.instances[idx[r]]);
  };
  take(events);
  take(censored);
  auto by_id = [](const SurvivalInstance& a, const SurvivalInstance& b) { return a.id < b.id; };
  std::sort(out.train.instances.begin(), out.train.instances.end(), by_id);
  std::sort(out.test.instances.begin(), out.test.instances.end(), by_id);
  for (std::size_t i = 0; i < out.train.size(); ++i) out.train.instances[i].id = i;
  for (std::size_t i = 0; i < out.test.size(); ++i) out.test.instances[i].id = i;

  standardize(out.train, {&out.test});
  out.train.bins = make_bins(out.train, n_bins);
  out.test.bins = out.train.bins;
  return out;
}

PoolSpec pool_spec_for_ratio(const Dataset& ds, double ratio) {
  if (!(ratio >= 0.0)) throw ConfigError("ratio must be >= 0");
  std::size_t events = 0;
  for (const auto& s : ds.instances) events += s.delta_true ? 1 : 0;
  // n_u + n_u * ratio <= size, n_u <= events
  auto n_u = static_cast<std::size_t>(std::floor(static_cast<double>(ds.size()) / (1.0 + ratio)));
  n_u = std::min(n_u, events);
  return {n_u, static_cast<std::size_t>(std::floor(static_cast<double>(n_u) * ratio))};
}

Dataset artificial_censor(const Dataset& ds, const PoolSpec& spec, std::uint64_t seed) {
  std::vector<std::size_t> events, rest;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (ds.instances[i].delta_true ? events : rest).push_back(i);
  if (events.size() < spec.n_uncensored)
    throw ConfigError("pool needs " + std::to_string(spec.n_uncensored) + " uncensored instances, dataset has " +
                      std::to_string(events.size()) + " events");
  auto rng = make_rng({seed, 0xce5});
  std::shuffle(events.begin(), events.end(), rng);
  std::vector<std::size_t> keep(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(spec.n_uncensored));
  rest.insert(rest.end(), events.begin() + static_cast<std::ptrdiff_t>(spec.n_uncensored), events.end());
  if (rest.size() < spec.n_censored)
    throw ConfigError("pool needs " + std::to_string(spec.n_censored) + " instances to censor, only " +
                      std::to_string(rest.size()) + " remain");
  std::sort(rest.begin(), rest.end());
  std::shuffle(rest.begin(), rest.end(), rng);
  std::vector<std::size_t> to_censor(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(spec.n_censored));

  Dataset out;
  out.feature_names = ds.feature_names;
  out.bins = ds.bins;
  for (auto i : keep) {
    auto s = ds.instances[i];
    s.t_obs = s.t_true;
    s.delta_obs = true;
    out.instances.push_back(std::move(s));
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (auto i : to_censor) {
    auto s = ds.instances[i];
    double u = u01(rng);
    while (u == 0.0) u = u01(rng);
    s.t_obs = u * s.t_true;
    s.delta_obs = false;
    out.instances.push_back(std::move(s));
  }
  std::sort(out.instances.begin(), out.instances.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < out.size(); ++i) out.instances[i].id = i;
  return out;
}

std::vector<double> synth_beta(const SynthConfig& cfg) {
  auto rng = make_rng({cfg.seed, 0xbe7a});
  std::normal_distribution<double> nd(0.0, cfg.beta_scale);
  std::vector<double> beta(cfg.dim);
  for (auto& b : beta) b = nd(rng);
  return beta;
}

Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.n < 1 || cfg.dim < 1) throw ConfigError("synthetic data needs n >= 1 and dim >= 1");
  if (!(cfg.base_rate > 0.0) || cfg.censor_rate < 0.0) throw ConfigError("invalid synthetic rates");
  const auto beta = synth_beta(cfg);
  auto rng = make_rng({cfg.seed, 0xda7a});
  std::normal_distribution<double> nd(0.0, 1.0);
  std::exponential_distribution<double> unit_exp(1.0);

  Dataset ds;
  for (std::size_t c = 0; c < cfg.dim; ++c) ds.feature_names.push_back("x" + std::to_string(c));
  ds.instances.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    SurvivalInstance s;
    s.id = i;
    s.x.resize(cfg.dim);
    double eta = 0.0;
    for (std::size_t c = 0; c < cfg.dim; ++c) {
      s.x[c] = nd(rng);
      eta += beta[c] * s.x[c];
    }
    const double t_event = unit_exp(rng) / (cfg.base_rate * std::exp(eta));
    const double e_c = unit_exp(rng);
    const double t_cens = cfg.censor_rate > 0.0 ? e_c / cfg.censor_rate
                                                : std::numeric_limits<double>::infinity();
    s.delta_true = t_event <= t_cens;
    s.t_true = s.delta_true ? t_event : t_cens;
    s.t_obs = s.t_true;
    s.delta_obs = s.delta_true;
    ds.instances.push_back(std::move(s));
  }
  std::size_t events = 0;
  for (const auto& s : ds.instances) events += s.delta_true ? 1 : 0;
  if (events >= cfg.n_bins) {
    try {
      ds.bins = make_bins(ds, cfg.n_bins);
    } catch (const DegenerateBinError&) {
    }
  }
  return ds;
}

Dataset synth_generate(std::size_t n, std::size_t dim, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.dim = dim;
  cfg.seed = seed;
  return synth_generate(cfg);
}

void validate(const Dataset& ds) {
  for (const auto& s : ds.instances) {
    if (s.x.size() != ds.dim())
      throw ValidationError("instance " + std::to_string(s.id) + " has wrong covariate dimension");
    if (s.t_obs > s.t_true) throw ValidationError("t_obs > t_true for instance " + std::to_string(s.id));
    if (s.delta_obs && (s.t_obs != s.t_true || !s.delta_true))
      throw ValidationError("observed event inconsistent with ground truth for instance " +
                            std::to_string(s.id));
    if (!(s.cost > 0.0)) throw ValidationError("cost must be > 0 for instance " + std::to_string(s.id));
  }
}

}  // namespace survbal
