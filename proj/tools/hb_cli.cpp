// hb: command-line front end for halting-bandit models.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hb/hb.hpp"

namespace {

using hb::json;

struct RunConfig {
  std::string command;
  std::string path;
  std::string model;
  std::string policy = "index";
  std::string method = "parametric";
  std::string format = "json";
  std::string path_spec;
  std::uint64_t seed = 1;
  std::size_t samples = 100000;
  std::size_t count = 1;
  std::size_t bandit = 0;
  std::optional<std::size_t> anchor;
  unsigned workers = 1;
  bool rational = false;
  double tolerance = 1e-10;
  std::optional<std::uint64_t> cap;
};

std::uint64_t resolve_cap(const RunConfig& cfg, std::uint64_t fallback) {
  if (cfg.cap) return *cfg.cap;
  if (const char* env = std::getenv("HB_CAP")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw hb::ParseError(std::string("HB_CAP is not a number: '") + env + "'");
    }
  }
  return fallback;
}

std::string instance_hash(const json& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : hb::dump_json(model, -1)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <class S>
json value_json(const S& v) {
  if constexpr (hb::is_exact_v<S>) {
    return v.str();
  } else {
    return v;
  }
}

std::optional<hb::PayoutModel> model_flag(const RunConfig& cfg) {
  if (cfg.model.empty()) return std::nullopt;
  return hb::parse_model(cfg.model);
}

// ---------------------------------------------------------------------------
// Output

std::string csv_cell(const json& v) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }
  if (v.is_structured()) return csv_cell(json(hb::dump_json(v, -1)));
  return hb::dump_json(v, -1);
}

/// Rows are the objects of `rows` (or the object itself); columns are the union of keys.
void emit_csv(std::ostream& os, const json& doc) {
  json rows = doc.contains("rows") ? doc["rows"] : json::array({doc});
  std::vector<std::string> cols;
  for (const auto& r : rows) {
    for (auto it = r.begin(); it != r.end(); ++it) {
      if (std::find(cols.begin(), cols.end(), it.key()) == cols.end()) cols.push_back(it.key());
    }
  }
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      os << (c ? "," : "");
      if (r.contains(cols[c])) os << csv_cell(r[cols[c]]);
    }
    os << '\n';
  }
}

void emit(const RunConfig& cfg, json doc) {
  if (cfg.format == "csv") {
    doc.erase("schema");
    emit_csv(std::cout, doc);
  } else {
    std::cout << hb::dump_json(doc) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_validate(const RunConfig& cfg) {
  const auto file = hb::load_model_file<double>(cfg.path);
  json out = {{"schema", hb::kSchemaVersion}, {"file", cfg.path}};
  json reports = json::array();
  bool ok = true;
  for (std::size_t i = 0; i < file.bandits.size(); ++i) {
    const auto& e = file.bandits[i];
    hb::ValidationReport r;
    if (e.is_tree()) {
      r = e.costs ? hb::validate(hb::ProfitBandit<double>{e.tree(), *e.costs}) : hb::validate(e.tree());
    } else {
      r = hb::validate(e.markov());
    }
    json violations = json::array();
    for (const auto& v : r.violations) {
      violations.push_back({{"kind", hb::to_string(v.kind)}, {"where", v.where}, {"message", v.message}});
    }
    reports.push_back({{"bandit", i}, {"ok", r.ok()}, {"violations", std::move(violations)}});
    ok = ok && r.ok();
  }
  out["ok"] = ok;
  if (cfg.format == "csv") {
    json rows = json::array();
    for (const auto& r : reports) {
      for (const auto& v : r["violations"]) {
        rows.push_back({{"bandit", r["bandit"]}, {"kind", v["kind"]}, {"where", v["where"]}, {"message", v["message"]}});
      }
    }
    out = {{"rows", rows.empty() ? json::array({{{"ok", ok}}}) : rows}};
  } else {
    out["bandits"] = std::move(reports);
  }
  emit(cfg, out);
  return ok ? 0 : 1;
}

json rule_json(const hb::StoppingRule& r) { return {{"anchor", r.anchor}, {"stop_set", r.stop_set}}; }

template <class S>
json tree_index(const RunConfig& cfg, const hb::ModelFile<S>& file) {
  const auto& entry = file.bandits.at(cfg.bandit);
  const auto model = model_flag(cfg).value_or(file.model.value_or(hb::PayoutModel::kCP));
  const auto& tree = entry.tree();
  hb::require_valid(tree);
  const auto reduced = hb::reduce(model, tree, entry.costs ? &*entry.costs : nullptr);
  const hb::NodeId anchor = cfg.anchor.value_or(tree.root());
  hb::IndexResult<S> res;
  if (cfg.method == "enumerate") {
    res = hb::solo_index_enumerate(reduced, anchor, resolve_cap(cfg, hb::kDefaultRuleCap));
  } else if (cfg.method == "parametric") {
    res = hb::solo_index_parametric(reduced, anchor);
  } else {
    throw hb::ParseError("unknown method '" + cfg.method + "' (enumerate|parametric)");
  }
  json lambdas = json::array();
  for (const auto& l : res.lambdas) lambdas.push_back(value_json(l));
  return {{"schema", hb::kSchemaVersion},
          {"bandit", cfg.bandit},
          {"anchor", anchor},
          {"model", hb::to_string(model)},
          {"method", cfg.method},
          {"arithmetic", hb::ScalarTraits<S>::name},
          {"index", value_json(res.index)},
          {"rule", rule_json(res.rule)},
          {"iterations", res.iterations},
          {"lambdas", std::move(lambdas)}};
}

int cmd_index(const RunConfig& cfg) {
  const auto file = hb::load_model_file<double>(cfg.path);
  if (cfg.bandit >= file.bandits.size()) throw hb::PreconditionError("bandit index out of range");
  if (file.bandits[cfg.bandit].is_tree()) {
    if (cfg.rational) {
      emit(cfg, tree_index(cfg, hb::load_model_file<hb::Rational>(cfg.path)));
    } else {
      emit(cfg, tree_index(cfg, file));
    }
    return 0;
  }
  if (cfg.rational) throw hb::PreconditionError("rational mode supports tree bandits only");
  if (cfg.method != "parametric") throw hb::PreconditionError("Markov bandits use the parametric solver");
  const auto& b = file.bandits[cfg.bandit].markov();
  hb::require_valid(b);
  const auto model = model_flag(cfg).value_or(file.model.value_or(hb::PayoutModel::kCP));
  const hb::StateId state = cfg.anchor.value_or(b.initial);
  const auto res = hb::model_index(model, b, state);
  std::vector<hb::StateId> stop_states;
  for (hb::StateId x = 0; x < res.stop_set.size(); ++x) {
    if (res.stop_set[x]) stop_states.push_back(x);
  }
  emit(cfg, {{"schema", hb::kSchemaVersion},
             {"bandit", cfg.bandit},
             {"anchor", state},
             {"model", hb::to_string(model)},
             {"method", cfg.method},
             {"arithmetic", "float"},
             {"index", res.index},
             {"stop_set", stop_states},
             {"iterations", res.iterations},
             {"lambdas", res.lambdas},
             {"phi", res.phi}});
  return 0;
}

hb::Policy load_policy(const RunConfig& cfg, std::size_t n) {
  if (cfg.policy.rfind("table:", 0) == 0) return hb::table_policy_from_json(hb::read_json_file(cfg.policy.substr(6)));
  return hb::parse_policy(cfg.policy, n);
}

json record(const RunConfig& cfg, const json& model_json, hb::PayoutModel model, const std::string& method) {
  return {{"schema", hb::kSchemaVersion},
          {"instance", instance_hash(model_json)},
          {"model", hb::to_string(model)},
          {"policy", cfg.policy},
          {"method", method}};
}

int cmd_evaluate(const RunConfig& cfg) {
  const json doc = hb::read_json_file(cfg.path);
  const auto file = hb::model_file_from_json<double>(doc);
  if (file.all_markov()) {
    if (cfg.rational) throw hb::PreconditionError("rational mode supports tree bandits only");
    const auto g = hb::markov_game(file, model_flag(cfg));
    const auto res = hb::evaluate_markov(g, load_policy(cfg, g.size()));
    json out = record(cfg, doc, g.model, "linear-system");
    out["value"] = res.value;
    out["tolerance"] = 1e-10;
    out["residual"] = res.residual;
    emit(cfg, out);
    return 0;
  }
  auto run = [&](auto tag) {
    using S = decltype(tag);
    const auto g = hb::tree_game(hb::model_file_from_json<S>(doc), model_flag(cfg));
    const S v = hb::evaluate_exact(g, load_policy(cfg, g.size()));
    json out = record(cfg, doc, g.model, "exact");
    out["value"] = value_json(v);
    out["tolerance"] = hb::is_exact_v<S> ? 0.0 : 1e-12;
    emit(cfg, out);
  };
  if (cfg.rational) {
    run(hb::Rational{});
  } else {
    run(0.0);
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.samples < 1) throw hb::PreconditionError("--samples must be at least 1");
  const json doc = hb::read_json_file(cfg.path);
  const auto file = hb::model_file_from_json<double>(doc);
  hb::SampleEstimate est;
  hb::PayoutModel model;
  if (file.all_markov()) {
    const auto g = hb::markov_game(file, model_flag(cfg));
    model = g.model;
    est = hb::run_policy_sampled(g, load_policy(cfg, g.size()), cfg.seed, cfg.samples, cfg.workers);
  } else {
    const auto g = hb::tree_game(file, model_flag(cfg));
    model = g.model;
    est = hb::run_policy_sampled(g, load_policy(cfg, g.size()), cfg.seed, cfg.samples, cfg.workers);
  }
  json out = record(cfg, doc, model, "monte-carlo");
  out["value"] = est.mean;
  out["std_error"] = est.std_error;
  out["samples"] = est.samples;
  out["seed"] = cfg.seed;
  out["tolerance"] = 5.0 * est.std_error;
  emit(cfg, out);
  return 0;
}

template <class S>
json optimal_json(const RunConfig& cfg, const json& doc) {
  const auto g = hb::tree_game(hb::model_file_from_json<S>(doc), model_flag(cfg));
  const auto sol = hb::dp_optimal(g, resolve_cap(cfg, hb::kDefaultHistoryCap));
  json out = record(cfg, doc, g.model, "dynamic-programming");
  out.erase("policy");
  out["value"] = value_json(sol.value);
  out["first_move"] = sol.policy.choice.at(hb::initial_history(g).position);
  out["histories"] = sol.values.size();
  out["bellman_residual"] = hb::bellman_residual(g, sol);
  out["policy"] = hb::to_json(sol.policy)["choices"];
  return out;
}

int cmd_optimal(const RunConfig& cfg) {
  const json doc = hb::read_json_file(cfg.path);
  emit(cfg, cfg.rational ? optimal_json<hb::Rational>(cfg, doc) : optimal_json<double>(cfg, doc));
  return 0;
}

template <class S>
json reduce_json(const RunConfig& cfg, const json& doc) {
  auto file = hb::model_file_from_json<S>(doc);
  const auto model = model_flag(cfg).value_or(file.model.value_or(hb::PayoutModel::kCP));
  hb::ModelFile<S> out;
  out.model = hb::PayoutModel::kCP;
  for (const auto& e : file.bandits) {
    if (!e.is_tree()) throw hb::PreconditionError("reduce works on tree bandits");
    hb::require_valid(e.tree());
    out.bandits.push_back({hb::reduce(model, e.tree(), e.costs ? &*e.costs : nullptr), std::nullopt});
  }
  json j = hb::to_json(out);
  j["reduced_from"] = hb::to_string(model);
  return j;
}

int cmd_reduce(const RunConfig& cfg) {
  const json doc = hb::read_json_file(cfg.path);
  if (cfg.format == "csv") throw hb::PreconditionError("reduce emits a model file; use --format json");
  emit(cfg, cfg.rational ? reduce_json<hb::Rational>(cfg, doc) : reduce_json<double>(cfg, doc));
  return 0;
}

template <class S>
json certify_game(const RunConfig& cfg, const hb::TreeGame<S>& g, const json& model_json) {
  json out = {{"instance-hash", instance_hash(model_json)}, {"model", hb::to_string(g.model)}};
  if (g.model == hb::PayoutModel::kPSP) {
    const auto r = hb::certify_greedy_pathwise(g, resolve_cap(cfg, hb::kDefaultPolicyCap));
    out["check"] = "greedy-pathwise";
    out["policies"] = r.policies;
    out["atoms"] = r.atoms;
    out["violations"] = r.violations;
    out["pass"] = r.pass;
    return out;
  }
  const auto r = hb::certify_index_optimality(g, cfg.tolerance, resolve_cap(cfg, hb::kDefaultHistoryCap));
  out["check"] = "index-optimality";
  if constexpr (hb::is_exact_v<S>) {
    out["index_value"] = r.index_value;
    out["dp_value"] = r.dp_value;
  } else {
    out["index_value"] = r.index_value_double;
    out["dp_value"] = r.dp_value_double;
  }
  out["histories"] = r.histories;
  out["unique_index_histories"] = r.unique_index_histories;
  out["disagreements"] = r.disagreements;
  out["pass"] = r.pass;
  return out;
}

template <class S>
json certify_corpus(const RunConfig& cfg) {
  const auto model = model_flag(cfg).value_or(hb::PayoutModel::kCP);
  std::vector<json> rows(cfg.count);
  std::vector<std::string> errors(cfg.count);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const std::uint64_t seed = cfg.seed + k;
      hb::TreeSpec spec;
      spec.non_increasing = model == hb::PayoutModel::kPSP;
      const auto g = hb::random_game<S>(seed, model, 2, 3, spec);
      hb::ModelFile<S> f{model, {}};
      for (std::size_t i = 0; i < g.size(); ++i) {
        f.bandits.push_back({g.bandits[i], g.costs.empty() ? std::nullopt : std::optional(g.costs[i])});
      }
      try {
        rows[k] = certify_game(cfg, g, hb::to_json(f));
      } catch (const std::exception& e) {
        errors[k] = e.what();
        rows[k] = {{"instance-hash", instance_hash(hb::to_json(f))}, {"model", hb::to_string(model)}, {"pass", false},
                   {"error", e.what()}};
      }
      rows[k]["seed"] = seed;
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(cfg.count)));
  std::vector<std::thread> pool;
  const std::size_t chunk = (cfg.count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(cfg.count, lo + chunk);
    if (lo < hi) pool.emplace_back(work, lo, hi);
  }
  for (auto& t : pool) t.join();
  json out = {{"schema", hb::kSchemaVersion}, {"rows", rows}};
  return out;
}

int cmd_certify(const RunConfig& cfg) {
  json out;
  if (cfg.path.empty()) {
    if (cfg.count < 1) throw hb::PreconditionError("--count must be at least 1");
    out = cfg.rational ? certify_corpus<hb::Rational>(cfg) : certify_corpus<double>(cfg);
  } else {
    const json doc = hb::read_json_file(cfg.path);
    json row = cfg.rational ? certify_game(cfg, hb::tree_game(hb::model_file_from_json<hb::Rational>(doc), model_flag(cfg)), doc)
                            : certify_game(cfg, hb::tree_game(hb::model_file_from_json<double>(doc), model_flag(cfg)), doc);
    row["seed"] = nullptr;
    out = {{"schema", hb::kSchemaVersion}, {"rows", json::array({row})}};
  }
  bool pass = true;
  for (const auto& r : out["rows"]) pass = pass && r["pass"].get<bool>();
  out["pass"] = pass;
  emit(cfg, out);
  return pass ? 0 : 1;
}

int cmd_gittins(const RunConfig& cfg) {
  const auto file = hb::load_model_file<double>(cfg.path);
  json rows = json::array();
  bool ok = true;
  for (std::size_t i = 0; i < file.bandits.size(); ++i) {
    if (file.bandits[i].is_tree()) throw hb::PreconditionError("gittins needs Markov bandits");
    const auto& b = file.bandits[i].markov();
    hb::require_valid(b);
    for (hb::StateId x = 0; x < b.size(); ++x) {
      if (cfg.anchor && *cfg.anchor != x) continue;
      const auto c = hb::gittins_compare(b, x, 1e-8);
      rows.push_back({{"bandit", i},
                      {"state", x},
                      {"beta", c.beta},
                      {"rho_ccp", c.rho_ccp},
                      {"gittins", c.gittins},
                      {"ratio", c.ratio},
                      {"discrepancy", c.discrepancy},
                      {"consistent", c.consistent}});
      ok = ok && c.consistent;
    }
  }
  emit(cfg, {{"schema", hb::kSchemaVersion}, {"rows", rows}, {"pass", ok}});
  return ok ? 0 : 1;
}

/// "--path" lists outcomes per bandit, bandits separated by ';' and outcomes by ','.
/// Tree outcomes are edge positions; Markov outcomes are next states, or 'h' for halting.
hb::PathDescriptor parse_path(const std::string& text, std::size_t n) {
  hb::PathDescriptor path;
  path.outcomes.assign(n, {});
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ';')) {
    if (i >= n) throw hb::ParseError("path lists more bandits than the model has");
    std::stringstream ps(part);
    std::string item;
    while (std::getline(ps, item, ',')) {
      if (item.empty()) continue;
      if (item == "h") {
        path.outcomes[i].push_back(hb::kHaltOutcome);
      } else {
        try {
          path.outcomes[i].push_back(std::stol(item));
        } catch (const std::exception&) {
          throw hb::ParseError("bad path entry '" + item + "'");
        }
      }
    }
    ++i;
  }
  return path;
}

int cmd_trace(const RunConfig& cfg) {
  const auto file = hb::load_model_file<double>(cfg.path);
  hb::Trace t;
  if (file.all_markov()) {
    const auto g = hb::markov_game(file, model_flag(cfg));
    t = hb::trace_times(g, load_policy(cfg, g.size()), parse_path(cfg.path_spec, g.size()));
  } else {
    const auto g = hb::tree_game(file, model_flag(cfg));
    t = hb::trace_times(g, load_policy(cfg, g.size()), parse_path(cfg.path_spec, g.size()));
  }
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row = {{"round", r.round}, {"choice", r.choice}, {"reward", r.reward}, {"survival", r.survival},
                {"halts", r.halts}};
    for (std::size_t i = 0; i < r.local_times.size(); ++i) row["T" + std::to_string(i)] = r.local_times[i];
    rows.push_back(std::move(row));
  }
  json out = {{"schema", hb::kSchemaVersion}, {"rows", rows}};
  if (cfg.format != "csv") {
    out["activation_rounds"] = t.activation_rounds;
    out["global_halting_time"] = t.global_halting_time ? json(*t.global_halting_time) : json(nullptr);
  }
  emit(cfg, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Index policies and oracles for halting bandits"};
  app.require_subcommand(1);
  app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--model", cfg.model, "Payout model: CP, PSP, SP, NH, TP, CCP");
  app.add_flag("--rational", cfg.rational, "Exact rational arithmetic (tree bandits)");
  app.add_option("--cap", cfg.cap, "Resource cap for enumeration (overrides HB_CAP)");
  app.add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();

  auto add = [&](const char* name, const char* help, bool needs_file = true) {
    auto* sub = app.add_subcommand(name, help);
    auto* opt = sub->add_option("file", cfg.path, "Model file");
    if (needs_file) opt->required();
    sub->callback([&cfg, name] { cfg.command = name; });
    return sub;
  };
  add("validate", "Check a model file");
  auto* index = add("index", "Solo-payout index of one bandit");
  index->add_option("--bandit", cfg.bandit, "Bandit position in the file");
  index->add_option("--anchor", cfg.anchor, "Anchor node or state (default: root/initial)");
  index->add_option("--method", cfg.method, "enumerate or parametric");
  auto* evaluate = add("evaluate", "Exact value of a policy");
  evaluate->add_option("--policy", cfg.policy, "index, block-index, greedy, cyclic[:order], table:<file>");
  auto* simulate = add("simulate", "Monte Carlo value of a policy");
  simulate->add_option("--policy", cfg.policy, "Policy");
  simulate->add_option("--seed", cfg.seed, "Seed");
  simulate->add_option("--samples", cfg.samples, "Sample count");
  add("optimal", "Optimal value by dynamic programming");
  add("reduce", "Collective-payout reduction of a model");
  auto* certify = add("certify", "Certify index optimality (or greedy dominance for PSP)", false);
  certify->add_option("--seed", cfg.seed, "First seed of a generated corpus");
  certify->add_option("--count", cfg.count, "Number of generated instances");
  certify->add_option("--tolerance", cfg.tolerance, "Float comparison tolerance")->check(CLI::PositiveNumber);
  auto* gittins = add("gittins", "Compare the cumulative index with a calibrated Gittins index");
  gittins->add_option("--state", cfg.anchor, "Only this state");
  auto* trace = add("trace", "Local-time bookkeeping along one sample path");
  trace->add_option("--policy", cfg.policy, "Policy");
  trace->add_option("--path", cfg.path_spec, "Outcomes per bandit, e.g. '1,0;0'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(hb::ErrorCode::kParse);
  }

  try {
    if (cfg.command == "validate") return cmd_validate(cfg);
    if (cfg.command == "index") return cmd_index(cfg);
    if (cfg.command == "evaluate") return cmd_evaluate(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "optimal") return cmd_optimal(cfg);
    if (cfg.command == "reduce") return cmd_reduce(cfg);
    if (cfg.command == "certify") return cmd_certify(cfg);
    if (cfg.command == "gittins") return cmd_gittins(cfg);
    if (cfg.command == "trace") return cmd_trace(cfg);
  } catch (const hb::Error& e) {
    std::cerr << "hb: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::out_of_range& e) {
    std::cerr << "hb: " << e.what() << '\n';
    return static_cast<int>(hb::ErrorCode::kPrecondition);
  }
  return static_cast<int>(hb::ErrorCode::kParse);
}
