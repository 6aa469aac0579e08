// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/harness.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace agentcrm {

using nlohmann::json;

namespace {

constexpr double kHour = static_cast<double>(kMillisPerHour);

Duration hours(double h) { return static_cast<Duration>(std::llround(h * kHour)); }

std::string kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::kBinary:
      return "binary";
    case MetricKind::kCount:
      return "count";
    case MetricKind::kValue:
      return "value";
  }
  return "binary";
}

MetricKind parse_kind(const std::string& s) {
  if (s == "binary") return MetricKind::kBinary;
  if (s == "count") return MetricKind::kCount;
  if (s == "value") return MetricKind::kValue;
  throw std::invalid_argument("unknown metric kind '" + s + "'");
}

std::string context_name(ContextMode m) {
  switch (m) {
    case ContextMode::kUser:
      return "user";
    case ContextMode::kGlobal:
      return "global";
    case ContextMode::kActivityTier:
      return "activity_tier";
  }
  return "user";
}

ContextMode parse_context(const std::string& s) {
  if (s == "user") return ContextMode::kUser;
  if (s == "global") return ContextMode::kGlobal;
  if (s == "activity_tier") return ContextMode::kActivityTier;
  throw std::invalid_argument("unknown context mode '" + s + "'");
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

// Linear interpolation between order statistics of a sorted sample.
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

json record_json(const EventRecord& r) { return json::parse(format_event_line(r)); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::string& base_dir) {
  ExperimentConfig cfg;
  cfg.sim = SimConfig::from_json(doc.at("sim"));
  if (doc.contains("seed")) cfg.sim.seed = doc.at("seed").get<std::uint64_t>();

  const json& cat = doc.at("catalog");
  if (cat.is_string()) {
    std::filesystem::path p(cat.get<std::string>());
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    cfg.catalog = MessageCatalog::load(p.string());
  } else {
    cfg.catalog = MessageCatalog::from_json(cat);
  }

  if (doc.contains("did")) {
    const json& d = doc.at("did");
    if (d.contains("t_delta_hours")) cfg.did.t_delta = hours(d.at("t_delta_hours").get<double>());
    cfg.did.k_controls = d.value("k_controls", cfg.did.k_controls);
    cfg.did.binarize_threshold = d.value("binarize_threshold", cfg.did.binarize_threshold);
    if (d.contains("half_life_hours")) {
      cfg.did.half_life = hours(d.at("half_life_hours").get<double>());
    }
  }
  cfg.n_cycles = doc.value("n_cycles", cfg.n_cycles);
  cfg.treatment_fraction = doc.value("treatment_fraction", cfg.treatment_fraction);
  if (doc.contains("cycle_hours")) cfg.cycle_length = hours(doc.at("cycle_hours").get<double>());
  cfg.min_cycles_between_sends = doc.value("min_cycles_between_sends", cfg.min_cycles_between_sends);
  cfg.warmup_days = doc.value("warmup_days", cfg.warmup_days);
  cfg.profile_window_days = doc.value("profile_window_days", cfg.profile_window_days);
  cfg.smoothing = doc.value("smoothing", cfg.smoothing);
  cfg.empirical_bayes_k = doc.value("empirical_bayes_k", cfg.empirical_bayes_k);
  if (doc.contains("context")) cfg.context = parse_context(doc.at("context").get<std::string>());
  cfg.baseline_multiplier = doc.value("baseline_multiplier", cfg.baseline_multiplier);
  if (doc.contains("metrics")) {
    for (const auto& m : doc.at("metrics")) {
      cfg.metrics.push_back({m.at("name").get<std::string>(),
                             parse_kind(m.value("kind", std::string("binary"))),
                             m.at("events").get<std::set<std::string>>()});
    }
  }
  cfg.ci_level = doc.value("ci_level", cfg.ci_level);
  cfg.bootstrap_resamples = doc.value("bootstrap_resamples", cfg.bootstrap_resamples);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(doc, std::filesystem::path(path).parent_path().string());
}

json ExperimentConfig::to_json() const {
  json metric_list = json::array();
  for (const auto& m : metrics) {
    metric_list.push_back({{"name", m.name}, {"kind", kind_name(m.kind)}, {"events", m.events}});
  }
  return {{"seed", sim.seed},
          {"sim", sim.to_json()},
          {"catalog", catalog.to_json()},
          {"did",
           {{"t_delta_hours", static_cast<double>(did.t_delta) / kHour},
            {"k_controls", did.k_controls},
            {"binarize_threshold", did.binarize_threshold},
            {"half_life_hours", static_cast<double>(did.half_life) / kHour}}},
          {"n_cycles", n_cycles},
          {"treatment_fraction", treatment_fraction},
          {"cycle_hours", static_cast<double>(cycle_length) / kHour},
          {"min_cycles_between_sends", min_cycles_between_sends},
          {"warmup_days", warmup_days},
          {"profile_window_days", profile_window_days},
          {"smoothing", smoothing},
          {"empirical_bayes_k", empirical_bayes_k},
          {"context", context_name(context)},
          {"baseline_multiplier", baseline_multiplier},
          {"metrics", metric_list},
          {"ci_level", ci_level},
          {"bootstrap_resamples", bootstrap_resamples}};
}

namespace {

Duration experiment_start(const ExperimentConfig& cfg) {
  return static_cast<Duration>(cfg.warmup_days) * kMillisPerDay;
}

SimConfig sized_sim(const ExperimentConfig& cfg) {
  SimConfig sim = cfg.sim;
  sim.horizon = experiment_start(cfg) + static_cast<Duration>(cfg.n_cycles) * cfg.cycle_length;
  return sim;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  validate(sized_sim(cfg));
  validate(cfg.did);
  if (cfg.n_cycles < 1) throw std::invalid_argument("n_cycles must be at least 1");
  if (!(cfg.treatment_fraction > 0.0 && cfg.treatment_fraction < 1.0)) {
    throw std::invalid_argument("treatment_fraction must be in (0, 1)");
  }
  if (cfg.cycle_length < 2 * cfg.did.t_delta) {
    throw std::invalid_argument("a cycle must hold both the pre and post window");
  }
  if (cfg.sim.effect_duration > cfg.cycle_length - cfg.did.t_delta) {
    throw std::invalid_argument("effect_duration runs past the end of the cycle");
  }
  if (cfg.warmup_days < 1) throw std::invalid_argument("warmup_days must be at least 1");
  if (cfg.profile_window_days < 1) {
    throw std::invalid_argument("profile_window_days must be at least 1");
  }
  if (cfg.min_cycles_between_sends < 1) {
    throw std::invalid_argument("min_cycles_between_sends must be at least 1");
  }
  if (!(cfg.smoothing > 0.0)) throw std::invalid_argument("smoothing must be positive");
  if (cfg.empirical_bayes_k < 0) throw std::invalid_argument("empirical_bayes_k must be >= 0");
  if (!(cfg.baseline_multiplier >= 0.0)) {
    throw std::invalid_argument("baseline_multiplier must be >= 0");
  }
  if (cfg.catalog.space().empty()) throw std::invalid_argument("catalogue has no action sets");
  if (cfg.catalog.templates().empty()) throw std::invalid_argument("catalogue has no templates");
  const auto& pm = cfg.sim.preferences;
  if ((pm.kind == PreferenceModel::Kind::kUniform || pm.kind == PreferenceModel::Kind::kOneHot) &&
      cfg.catalog.space().find(pm.action_set) == nullptr) {
    throw std::invalid_argument("preference action set '" + pm.action_set +
                                "' is not in the catalogue's action space");
  }
  std::set<std::string> names;
  for (const auto& m : cfg.metrics) {
    if (!names.insert(m.name).second) {
      throw std::invalid_argument("duplicate metric '" + m.name + "'");
    }
    if (m.events.empty()) throw std::invalid_argument("metric '" + m.name + "' has no events");
  }
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) {
    throw std::invalid_argument("ci_level must be in (0, 1)");
  }
  if (cfg.bootstrap_resamples < 1) {
    throw std::invalid_argument("bootstrap_resamples must be positive");
  }
}

// ---------------------------------------------------------------------------
// Lift report

const MetricLift& LiftReport::metric(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  throw std::out_of_range("no metric '" + name + "' in report");
}

json LiftReport::to_json() const {
  json list = json::array();
  for (const auto& m : metrics) {
    list.push_back({{"name", m.name},
                    {"kind", kind_name(m.kind)},
                    {"treated_rate", m.treated_rate},
                    {"control_rate", m.control_rate},
                    {"absolute_lift", m.absolute_lift},
                    {"relative_lift", optional_json(m.relative_lift)},
                    {"ci_low", m.ci_low},
                    {"ci_high", m.ci_high},
                    {"relative_ci_low", optional_json(m.relative_ci_low)},
                    {"relative_ci_high", optional_json(m.relative_ci_high)}});
  }
  return {{"ci_level", ci_level},
          {"resamples", resamples},
          {"pairs", pairs},
          {"unmatched", unmatched},
          {"metrics", list}};
}

LiftReport LiftReport::from_json(const json& doc) {
  LiftReport r;
  r.ci_level = doc.at("ci_level").get<double>();
  r.resamples = doc.at("resamples").get<int>();
  r.pairs = doc.at("pairs").get<std::size_t>();
  r.unmatched = doc.at("unmatched").get<std::size_t>();
  for (const auto& m : doc.at("metrics")) {
    MetricLift l;
    l.name = m.at("name").get<std::string>();
    l.kind = parse_kind(m.at("kind").get<std::string>());
    l.treated_rate = m.at("treated_rate").get<double>();
    l.control_rate = m.at("control_rate").get<double>();
    l.absolute_lift = m.at("absolute_lift").get<double>();
    l.relative_lift = optional_from(m.at("relative_lift"));
    l.ci_low = m.at("ci_low").get<double>();
    l.ci_high = m.at("ci_high").get<double>();
    l.relative_ci_low = optional_from(m.at("relative_ci_low"));
    l.relative_ci_high = optional_from(m.at("relative_ci_high"));
    r.metrics.push_back(std::move(l));
  }
  return r;
}

std::string LiftReport::to_table() const {
  std::ostringstream out;
  out << std::fixed;
  out << "matched pairs: " << pairs << "  unmatched treated: " << unmatched
      << "  CI level: " << std::setprecision(1) << ci_level * 100 << "%  resamples: " << resamples
      << "\n";
  out << std::left << std::setw(14) << "metric" << std::setw(8) << "kind" << std::right
      << std::setw(12) << "treated" << std::setw(12) << "control" << std::setw(12) << "abs lift"
      << std::setw(26) << "abs CI" << std::setw(10) << "rel lift" << "\n";
  for (const auto& m : metrics) {
    std::ostringstream ci;
    ci << std::fixed << std::setprecision(4) << "[" << m.ci_low << ", " << m.ci_high << "]";
    std::ostringstream rel;
    if (m.relative_lift) {
      rel << std::showpos << std::fixed << std::setprecision(2) << *m.relative_lift * 100 << "%";
    } else {
      rel << "n/a";
    }
    out << std::left << std::setw(14) << m.name << std::setw(8) << kind_name(m.kind) << std::right
        << std::setprecision(4) << std::setw(12) << m.treated_rate << std::setw(12)
        << m.control_rate << std::setw(12) << m.absolute_lift << std::setw(26) << ci.str()
        << std::setw(10) << rel.str() << "\n";
  }
  return out.str();
}

LiftReport matched_lift(const std::vector<UserOutcome>& treated,
                        const std::vector<UserOutcome>& control,
                        const std::map<std::string, UserProfile>& profiles,
                        const std::vector<MetricSpec>& metrics, const LiftOptions& options) {
  if (treated.empty() || control.empty()) {
    throw std::invalid_argument("matched_lift needs non-empty treated and control groups");
  }
  auto profile_of = [&](const std::string& id) -> const UserProfile& {
    auto it = profiles.find(id);
    if (it == profiles.end()) throw std::invalid_argument("no profile for user '" + id + "'");
    return it->second;
  };
  const std::size_t n_metrics = metrics.size();
  auto check_width = [&](const UserOutcome& o) {
    if (o.values.size() != n_metrics) {
      throw std::invalid_argument("outcome of '" + o.user_id + "' has the wrong metric count");
    }
  };

  std::vector<UserProfile> control_profiles;
  std::unordered_map<std::string, std::size_t> control_index;
  for (std::size_t i = 0; i < control.size(); ++i) {
    check_width(control[i]);
    control_profiles.push_back(profile_of(control[i].user_id));
    control_index.emplace(control[i].user_id, i);
  }
  const ControlPool pool(control_profiles);

  std::vector<const UserOutcome*> order;
  for (const auto& t : treated) {
    check_width(t);
    order.push_back(&t);
  }
  std::sort(order.begin(), order.end(),
            [](const UserOutcome* a, const UserOutcome* b) { return a->user_id < b->user_id; });

  std::vector<char> taken(control.size(), 0);
  std::size_t remaining = control.size();
  // Paired outcomes, metric-major.
  std::vector<std::vector<double>> y_t(n_metrics), y_c(n_metrics);
  LiftReport report;
  report.ci_level = options.ci_level;
  report.resamples = options.resamples;
  for (const UserOutcome* t : order) {
    if (remaining == 0) {
      ++report.unmatched;
      continue;
    }
    const auto pick = pool.select(profile_of(t->user_id), 1, [&](const std::string& id) {
      return !taken[control_index.at(id)];
    });
    const std::size_t c = control_index.at(pick.user_ids.front());
    taken[c] = 1;
    --remaining;
    for (std::size_t m = 0; m < n_metrics; ++m) {
      y_t[m].push_back(t->values[m]);
      y_c[m].push_back(control[c].values[m]);
    }
  }
  const std::size_t n = order.size() - report.unmatched;
  report.pairs = n;
  const double dn = static_cast<double>(n);

  // Bootstrap over pairs; one index draw serves every metric.
  std::vector<std::vector<double>> abs_stats(n_metrics), rel_stats(n_metrics);
  Rng rng(options.seed);
  std::vector<double> sum_t(n_metrics), sum_c(n_metrics);
  for (int b = 0; b < options.resamples; ++b) {
    std::fill(sum_t.begin(), sum_t.end(), 0.0);
    std::fill(sum_c.begin(), sum_c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(n));
      for (std::size_t m = 0; m < n_metrics; ++m) {
        sum_t[m] += y_t[m][j];
        sum_c[m] += y_c[m][j];
      }
    }
    for (std::size_t m = 0; m < n_metrics; ++m) {
      abs_stats[m].push_back((sum_t[m] - sum_c[m]) / dn);
      if (sum_c[m] > 0.0) rel_stats[m].push_back(sum_t[m] / sum_c[m] - 1.0);
    }
  }

  const double lo_q = (1.0 - options.ci_level) / 2.0;
  const double hi_q = 1.0 - lo_q;
  for (std::size_t m = 0; m < n_metrics; ++m) {
    MetricLift l;
    l.name = metrics[m].name;
    l.kind = metrics[m].kind;
    l.treated_rate = std::accumulate(y_t[m].begin(), y_t[m].end(), 0.0) / dn;
    l.control_rate = std::accumulate(y_c[m].begin(), y_c[m].end(), 0.0) / dn;
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += y_t[m][i] - y_c[m][i];
    l.absolute_lift = diff / dn;
    if (l.control_rate > 0.0) l.relative_lift = l.treated_rate / l.control_rate - 1.0;
    auto& a = abs_stats[m];
    std::sort(a.begin(), a.end());
    l.ci_low = percentile(a, lo_q);
    l.ci_high = percentile(a, hi_q);
    // Relative CIs only when every resample had a positive control total.
    auto& r = rel_stats[m];
    if (!r.empty() && r.size() == a.size()) {
      std::sort(r.begin(), r.end());
      l.relative_ci_low = percentile(r, lo_q);
      l.relative_ci_high = percentile(r, hi_q);
    }
    report.metrics.push_back(std::move(l));
  }
  return report;
}

// ---------------------------------------------------------------------------
// State

json ExperimentState::to_json() const {
  json pending_json = json::object();
  for (const auto& [user, records] : pending) {
    json list = json::array();
    for (const auto& r : records) list.push_back(record_json(r));
    pending_json[user] = std::move(list);
  }
  return {{"format", kFormatTag},   {"version", kFormatVersion},
          {"seed", seed},           {"next_cycle", next_cycle},
          {"store", store.to_json()}, {"metric_totals", metric_totals},
          {"pending", pending_json}, {"last_send", last_send}};
}

ExperimentState ExperimentState::from_json(const json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormatTag) {
      throw std::runtime_error("not an experiment state document");
    }
    const int version = doc.at("version").get<int>();
    if (version != kFormatVersion) {
      throw std::runtime_error("unsupported state version " + std::to_string(version));
    }
    ExperimentState s;
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.next_cycle = doc.at("next_cycle").get<int>();
    s.store = PosteriorStore::from_json(doc.at("store"));
    s.metric_totals = doc.at("metric_totals").get<std::map<std::string, std::vector<double>>>();
    for (const auto& [user, list] : doc.at("pending").items()) {
      auto& out = s.pending[user];
      for (const auto& r : list) out.push_back(parse_event_line(r.dump()));
    }
    s.last_send = doc.at("last_send").get<std::map<std::string, int>>();
    return s;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed experiment state: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("malformed experiment state: ") + e.what());
  }
}

namespace {

json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(std::string("cannot open ") + what + " '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string(what) + " '" + path + "' is corrupt: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

void snapshot_state(const PosteriorStore& store, const std::string& path) {
  write_text_file(path, store.to_json().dump(1) + "\n");
}

PosteriorStore restore_state(const std::string& path) {
  return PosteriorStore::from_json(read_json_file(path, "snapshot"));
}

void save_experiment_state(const ExperimentState& state, const std::string& path) {
  write_text_file(path, state.to_json().dump() + "\n");
}

ExperimentState load_experiment_state(const std::string& path) {
  return ExperimentState::from_json(read_json_file(path, "experiment state"));
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  auto join_lines = [](const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) {
      text += l;
      text += '\n';
    }
    return text;
  };
  write_text_file((base / "decisions.jsonl").string(), join_lines(result.decision_log));
  write_text_file((base / "estimates.jsonl").string(), join_lines(result.estimate_log));
  write_text_file((base / "weights.json").string(), result.weights.to_json().dump(1) + "\n");
  save_experiment_state(result.state, (base / "state.json").string());
  snapshot_state(result.state.store, (base / "posteriors.json").string());
  if (result.report) {
    write_text_file((base / "lift_report.json").string(), result.report->to_json().dump(1) + "\n");
    write_text_file((base / "lift_report.txt").string(), result.report->to_table());
  }
}

// ---------------------------------------------------------------------------
// Experiment loop

namespace {

struct Send {
  std::size_t user = 0;  // population index
  std::string context;
  ActionCombo delivered;
  std::string message_id;
  // Priors of the delivered combo's entries as resolved at decision time, so
  // the update phase does not depend on the order updates are applied in.
  std::map<PosteriorKey, BetaPosterior> priors;
};

class Experiment {
 public:
  Experiment(const ExperimentConfig& cfg, const RunOptions& options)
      : cfg_(cfg), sim_(sized_sim(cfg)), root_(cfg.seed()), options_(options) {}

  ExperimentResult run();

 private:
  void setup();
  void run_cycle(int cycle);
  std::string context_for(std::size_t user) const;
  std::optional<BetaPosterior> impute(std::size_t treated_pos, const PosteriorKey& key) const;
  void accumulate(std::size_t user, const EventRecord& r);

  const ExperimentConfig& cfg_;
  SimConfig sim_;
  Rng root_;
  RunOptions options_;

  std::vector<LatentUser> users_;
  std::vector<char> is_treated_;
  std::vector<std::size_t> treated_;  // population indices, id order
  std::vector<std::size_t> control_;
  std::unordered_map<std::string, std::size_t> index_of_;
  std::vector<int> treated_pos_;  // population index -> position in treated_, or -1

  EventWeightTable weights_;
  std::map<std::string, UserProfile> profiles_;
  std::vector<std::string> tier_;
  // treated position -> control-group population indices, nearest first.
  std::vector<std::vector<std::size_t>> controls_of_;
  // treated position -> other treated positions, nearest first.
  std::vector<std::vector<std::size_t>> neighbours_of_;
  // (set, label) -> treated position -> has an entry; rebuilt every cycle.
  std::map<std::pair<std::string, std::string>, std::vector<char>> has_entry_;

  ExperimentState state_;
  ExperimentResult result_;
};

std::string Experiment::context_for(std::size_t user) const {
  switch (cfg_.context) {
    case ContextMode::kUser:
      return users_[user].user_id;
    case ContextMode::kGlobal:
      return "global";
    case ContextMode::kActivityTier:
      return tier_[user];
  }
  return "global";
}

std::optional<BetaPosterior> Experiment::impute(std::size_t treated_pos,
                                                const PosteriorKey& key) const {
  auto it = has_entry_.find({key.action_set, key.label});
  if (it == has_entry_.end()) return std::nullopt;
  const auto& has = it->second;
  std::vector<BetaPosterior> found;
  const auto k = static_cast<std::size_t>(cfg_.empirical_bayes_k);
  for (std::size_t pos : neighbours_of_[treated_pos]) {
    if (!has[pos]) continue;
    const auto& id = users_[treated_[pos]].user_id;
    found.push_back(*state_.store.find({id, key.action_set, key.label}));
    if (found.size() == k) break;
  }
  if (found.empty()) return std::nullopt;
  return mean_posterior(found);
}

void Experiment::accumulate(std::size_t user, const EventRecord& r) {
  auto& totals = state_.metric_totals[users_[user].user_id];
  for (std::size_t m = 0; m < cfg_.metrics.size(); ++m) {
    const auto& spec = cfg_.metrics[m];
    if (!spec.events.contains(r.event_name)) continue;
    totals[m] += spec.kind == MetricKind::kValue ? r.weight_value() : 1.0;
  }
}

void Experiment::setup() {
  users_ = generate_population(sim_, cfg_.catalog.space());
  const std::size_t n = users_.size();
  is_treated_.assign(n, 0);
  treated_pos_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    index_of_.emplace(users_[i].user_id, i);
    if (root_.split("assignment", i).uniform() < cfg_.treatment_fraction) {
      is_treated_[i] = 1;
      treated_pos_[i] = static_cast<int>(treated_.size());
      treated_.push_back(i);
    } else {
      control_.push_back(i);
    }
  }
  if (treated_.empty() || control_.empty()) {
    throw std::invalid_argument("assignment left the treatment or control group empty");
  }

  // Warm-up: organic behaviour before the first decision.
  const Interval warmup(0, experiment_start(cfg_));
  std::vector<EventStream> warm;
  warm.reserve(n);
  std::map<std::string, std::vector<EventRecord>> spill;
  for (std::size_t i = 0; i < n; ++i) {
    EventStream s = simulate_organic(users_[i], sim_, warmup, root_.split("warmup", i));
    std::vector<EventRecord> inside;
    for (const auto& r : s.records()) {
      if (r.timestamp < warmup.end) {
        inside.push_back(r);
      } else if (r.timestamp < sim_.horizon) {
        spill[users_[i].user_id].push_back(r);
      }
    }
    warm.emplace_back(users_[i].user_id, std::move(inside));
  }
  weights_ = fit_event_weights(warm, sim_.goal_spec, cfg_.smoothing);

  std::set<std::string> vocab_set;
  for (const auto& [event, rate] : sim_.base_rates) vocab_set.insert(event);
  vocab_set.insert(sim_.goal_spec.goal_event_names.begin(), sim_.goal_spec.goal_event_names.end());
  const std::vector<std::string> vocabulary(vocab_set.begin(), vocab_set.end());
  const Interval profile_window(
      std::max<Timestamp>(0, warmup.end - static_cast<Duration>(cfg_.profile_window_days) *
                                              kMillisPerDay),
      warmup.end);
  std::vector<std::size_t> activity(n);
  for (std::size_t i = 0; i < n; ++i) {
    profiles_.emplace(users_[i].user_id, build_profile(warm[i], vocabulary, profile_window));
    activity[i] = warm[i].view(profile_window).size();
  }
  std::vector<std::size_t> sorted_activity = activity;
  std::sort(sorted_activity.begin(), sorted_activity.end());
  const std::size_t median = sorted_activity[n / 2];
  tier_.resize(n);
  for (std::size_t i = 0; i < n; ++i) tier_[i] = activity[i] >= median ? "tier:high" : "tier:low";
  warm.clear();

  std::vector<UserProfile> control_profiles;
  for (std::size_t i : control_) control_profiles.push_back(profiles_.at(users_[i].user_id));
  const ControlPool control_pool(control_profiles);
  std::vector<UserProfile> treated_profiles;
  for (std::size_t i : treated_) treated_profiles.push_back(profiles_.at(users_[i].user_id));
  const ControlPool treated_pool(treated_profiles);

  controls_of_.resize(treated_.size());
  neighbours_of_.resize(treated_.size());
  const auto k = static_cast<std::size_t>(cfg_.did.k_controls);
  for (std::size_t pos = 0; pos < treated_.size(); ++pos) {
    const auto& profile = treated_profiles[pos];
    for (const auto& id : control_pool.select(profile, k).user_ids) {
      controls_of_[pos].push_back(index_of_.at(id));
    }
    if (cfg_.empirical_bayes_k > 0 && cfg_.context == ContextMode::kUser) {
      for (std::size_t other : treated_pool.rank(profile.features)) {
        if (other != pos) neighbours_of_[pos].push_back(other);
      }
    }
  }

  if (options_.resume) {
    state_ = *options_.resume;
    if (state_.seed != cfg_.seed()) {
      throw std::invalid_argument("saved state was produced with a different seed");
    }
    if (state_.next_cycle < 0 || state_.next_cycle > cfg_.n_cycles) {
      throw std::invalid_argument("saved state is past the configured number of cycles");
    }
  } else {
    state_ = ExperimentState{};
    state_.seed = cfg_.seed();
    for (const auto& u : users_) {
      state_.metric_totals[u.user_id].assign(cfg_.metrics.size(), 0.0);
    }
    state_.pending = std::move(spill);
  }
}

void Experiment::run_cycle(int cycle) {
  const Timestamp t_day = experiment_start(cfg_) + static_cast<Duration>(cycle) * cfg_.cycle_length;
  const Timestamp t_int = t_day + cfg_.did.t_delta;
  const Timestamp day_end = t_day + cfg_.cycle_length;
  const Timestamp effect_end = t_int + sim_.effect_duration;
  const auto& space = cfg_.catalog.space();
  const auto c64 = static_cast<std::uint64_t>(cycle);

  const bool use_eb = cfg_.empirical_bayes_k > 0 && cfg_.context == ContextMode::kUser;
  has_entry_.clear();
  if (use_eb) {
    for (const auto& [key, post] : state_.store.entries()) {
      auto it = index_of_.find(key.context);
      if (it == index_of_.end() || treated_pos_[it->second] < 0) continue;
      auto& has = has_entry_[{key.action_set, key.label}];
      if (has.empty()) has.assign(treated_.size(), 0);
      has[static_cast<std::size_t>(treated_pos_[it->second])] = 1;
    }
  }

  // Decide.
  std::vector<Send> sends;
  std::vector<int> send_of(users_.size(), -1);
  for (std::size_t pos = 0; pos < treated_.size(); ++pos) {
    const std::size_t i = treated_[pos];
    const LatentUser& user = users_[i];
    const std::string context = context_for(i);
    json line = {{"cycle", cycle}, {"user_id", user.user_id}, {"t_int", t_int},
                 {"context", context}};

    if (auto it = state_.last_send.find(user.user_id);
        it != state_.last_send.end() && cycle - it->second < cfg_.min_cycles_between_sends) {
      line["status"] = "skipped_frequency_cap";
      result_.decision_log.push_back(line.dump());
      continue;
    }
    PriorImputer imputer;
    if (use_eb) {
      imputer = [this, pos](const PosteriorKey& key) { return impute(pos, key); };
    }
    Rng rng = root_.split("decide", c64, i);
    const ActionCombo sampled = thompson_select(state_.store, context, space, rng, imputer);
    line["sampled"] = sampled.to_json();

    const auto eligible = eligible_templates(cfg_.catalog, user.tags);
    if (eligible.empty()) {
      line["status"] = "skipped_no_eligible_message";
      result_.decision_log.push_back(line.dump());
      continue;
    }
    const MessageTemplate& tmpl = match_message(sampled, eligible);
    Send send{i, context, delivered_combo(sampled, tmpl), tmpl.message_id, {}};
    for (const auto& [set, label] : send.delivered.choices) {
      PosteriorKey key{context, set, label};
      const BetaPosterior prior = state_.store.resolve(key, imputer);
      send.priors.emplace(std::move(key), prior);
    }
    line["status"] = "sent";
    line["message_id"] = tmpl.message_id;
    line["channel"] = tmpl.channel;
    line["delivered"] = send.delivered.to_json();
    result_.decision_log.push_back(line.dump());
    send_of[i] = static_cast<int>(sends.size());
    sends.push_back(std::move(send));
  }

  // Simulate the cycle for everyone.
  std::vector<EventStream> day(users_.size());
  for (std::size_t i = 0; i < users_.size(); ++i) {
    const LatentUser& user = users_[i];
    Rng rng = root_.split("cycle", i, c64);
    std::vector<EventRecord> records;
    if (auto it = state_.pending.find(user.user_id); it != state_.pending.end()) {
      records = std::move(it->second);
      state_.pending.erase(it);
    }
    auto append = [&](const EventStream& s) {
      records.insert(records.end(), s.records().begin(), s.records().end());
    };
    append(simulate_organic(user, sim_, Interval(t_day, t_int), rng.split(0)));
    const Interval effect(t_int, effect_end);
    if (send_of[i] >= 0) {
      append(apply_intervention(user, sends[static_cast<std::size_t>(send_of[i])].delivered, t_int,
                                sim_, rng.split(1), cfg_.baseline_multiplier));
    } else {
      append(simulate_window(user, sim_, effect, cfg_.baseline_multiplier, rng.split(1)));
    }
    if (effect_end < day_end) {
      append(simulate_organic(user, sim_, Interval(effect_end, day_end), rng.split(2)));
    }

    std::vector<EventRecord> inside;
    for (auto& r : records) {
      if (r.timestamp < day_end) {
        accumulate(i, r);
        inside.push_back(std::move(r));
      } else if (r.timestamp < sim_.horizon) {
        state_.pending[user.user_id].push_back(std::move(r));
      }
    }
    day[i] = EventStream(user.user_id, std::move(inside));
  }

  // Measure.
  std::vector<int> rewards;
  rewards.reserve(sends.size());
  std::vector<const EventStream*> controls;
  for (const auto& send : sends) {
    const LatentUser& user = users_[send.user];
    controls.clear();
    for (std::size_t c : controls_of_[static_cast<std::size_t>(treated_pos_[send.user])]) {
      controls.push_back(&day[c]);
    }
    const InterventionRecord rec{user.user_id, t_int, send.delivered, send.context};
    const IteEstimate est = did_estimate(day[send.user], rec, controls, weights_, cfg_.did);
    json line = est.to_json();
    line["cycle"] = cycle;
    line["user_id"] = user.user_id;
    line["t_int"] = t_int;
    line["context"] = send.context;
    line["combo"] = send.delivered.to_json();
    line["message_id"] = send.message_id;
    result_.estimate_log.push_back(line.dump());
    rewards.push_back(est.reward_bit);
  }

  // Update.
  for (std::size_t s = 0; s < sends.size(); ++s) {
    const auto& send = sends[s];
    const PriorImputer from_decision = [&send](const PosteriorKey& key) {
      return std::optional<BetaPosterior>(send.priors.at(key));
    };
    update_posterior(state_.store, space, send.context, send.delivered, rewards[s], from_decision);
    state_.last_send[users_[send.user].user_id] = cycle;
  }
  state_.next_cycle = cycle + 1;
}

ExperimentResult Experiment::run() {
  validate(cfg_);
  setup();
  const int stop = std::min(cfg_.n_cycles, options_.stop_after.value_or(cfg_.n_cycles));
  for (int c = state_.next_cycle; c < stop; ++c) run_cycle(c);

  for (std::size_t i : treated_) result_.treated_users.push_back(users_[i].user_id);
  for (std::size_t i : control_) result_.control_users.push_back(users_[i].user_id);
  result_.weights = weights_;

  if (state_.next_cycle == cfg_.n_cycles) {
    auto outcomes = [&](const std::vector<std::size_t>& group) {
      std::vector<UserOutcome> out;
      for (std::size_t i : group) {
        UserOutcome o{users_[i].user_id, state_.metric_totals.at(users_[i].user_id)};
        for (std::size_t m = 0; m < cfg_.metrics.size(); ++m) {
          if (cfg_.metrics[m].kind == MetricKind::kBinary) o.values[m] = o.values[m] > 0 ? 1 : 0;
        }
        out.push_back(std::move(o));
      }
      return out;
    };
    LiftOptions lift;
    lift.ci_level = cfg_.ci_level;
    lift.resamples = cfg_.bootstrap_resamples;
    lift.seed = root_.split("bootstrap").seed();
    result_.report =
        matched_lift(outcomes(treated_), outcomes(control_), profiles_, cfg_.metrics, lift);
  }
  result_.state = std::move(state_);
  return std::move(result_);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  return Experiment(cfg, options).run();
}

}  // namespace agentcrm
