#include "clab/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "json_util.hpp"

namespace clab::scenario {

using clab::detail::check_known_fields;
using nlohmann::json;

void Scenario::validate() const {
  workload::validate_or_throw(workload);
  if (!(horizon > warmup) || warmup < 0)
    throw InputError("scenario needs horizon > warmup >= 0");
  if (replications < 1) throw InputError("replications must be >= 1");
  if (mode == engine::Mode::Closed && mpl < 1) throw InputError("closed mode needs M >= 1");
  if (mode == engine::Mode::Open && !(lambda >= 0))
    throw InputError("open mode needs lambda >= 0");
  if (qn) qn->validate();
  if (!(lambda_factor > 0)) throw InputError("lambda_factor must be > 0");
  if (!(normalized_wait > 0)) throw InputError("A (normalized wait) must be > 0");
}

namespace {

ccpolicy::RestartDiscipline restart_from_json(const json& j, const std::string& where) {
  check_known_fields(j, {"kind", "mean"}, where);
  ccpolicy::RestartDiscipline d;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "immediate")
    d.kind = ccpolicy::RestartDiscipline::Kind::Immediate;
  else if (kind == "delayed")
    d.kind = ccpolicy::RestartDiscipline::Kind::Delayed;
  else if (kind == "restart_waiting")
    d.kind = ccpolicy::RestartDiscipline::Kind::RestartWaiting;
  else
    throw InputError("unknown restart kind '" + kind + "' in " + where);
  d.mean_delay = j.value("mean", 0.0);
  return d;
}

ccpolicy::PolicyConfig policy_from_json(const json& j,
                                        engine::MultiphaseConfig& multiphase) {
  check_known_fields(j, {"name", "params"}, "policy");
  auto policy =
      ccpolicy::PolicyConfig::make(ccpolicy::policy_kind_from_name(j.at("name")));
  if (!j.contains("params")) return policy;
  const json& p = j.at("params");
  check_known_fields(
      p, {"symmetric", "attempts_limit", "restart", "victim_restart", "multiphase"},
      "policy params");
  if (p.contains("symmetric")) {
    if (policy.kind != ccpolicy::PolicyKind::RunningPriority)
      throw InputError("'symmetric' only applies to running_priority");
    policy.symmetric = p.at("symmetric").get<bool>();
  }
  if (p.contains("attempts_limit")) {
    if (policy.kind != ccpolicy::PolicyKind::NoWaiting)
      throw InputError("'attempts_limit' only applies to no_waiting");
    policy.attempts_limit = p.at("attempts_limit").get<long>();
  }
  if (p.contains("restart"))
    policy.self_restart = restart_from_json(p.at("restart"), "policy restart");
  if (p.contains("victim_restart"))
    policy.victim_restart =
        restart_from_json(p.at("victim_restart"), "policy victim_restart");
  if (p.contains("multiphase")) {
    const json& m = p.at("multiphase");
    check_known_fields(m, {"virtual_phase", "preclaim"}, "multiphase");
    multiphase.virtual_phase = m.value("virtual_phase", false);
    multiphase.preclaim = m.value("preclaim", false);
  }
  return policy;
}

loadctl::LoadControlConfig load_control_from_json(const json& j) {
  check_known_fields(j, {"name", "params"}, "load_control");
  loadctl::LoadControlConfig cfg;
  cfg.kind = loadctl::load_control_kind_from_name(j.at("name"));
  if (!j.contains("params")) return cfg;
  const json& p = j.at("params");
  check_known_fields(p,
                     {"m_max", "threshold", "hysteresis", "maturity", "trigger",
                      "window", "floor", "ceiling", "initial", "history",
                      "beta_limit", "alpha_alarm", "A"},
                     "load_control params");
  cfg.m_max = p.value("m_max", cfg.m_max);
  cfg.threshold = p.value("threshold", cfg.threshold);
  cfg.hysteresis = p.value("hysteresis", cfg.hysteresis);
  cfg.maturity = p.value("maturity", cfg.maturity);
  cfg.trigger = p.value("trigger", cfg.trigger);
  cfg.window = p.value("window", cfg.window);
  cfg.floor_mpl = p.value("floor", cfg.floor_mpl);
  cfg.ceiling_mpl = p.value("ceiling", cfg.ceiling_mpl);
  cfg.initial_mpl = p.value("initial", cfg.initial_mpl);
  cfg.history = p.value("history", cfg.history);
  cfg.beta_limit = p.value("beta_limit", cfg.beta_limit);
  cfg.alpha_alarm = p.value("alpha_alarm", cfg.alpha_alarm);
  cfg.normalized_wait = p.value("A", cfg.normalized_wait);
  return cfg;
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text,
                                 const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario JSON parse error: ") + e.what());
  }
  try {
    check_known_fields(root,
                       {"workload", "workload_file", "mode", "policy", "load_control",
                        "horizon", "warmup", "replications", "seed", "qn", "analyze"},
                       "scenario");
    Scenario s;
    if (root.contains("workload") == root.contains("workload_file"))
      throw InputError("scenario needs exactly one of workload / workload_file");
    if (root.contains("workload")) {
      s.workload = workload::workload_from_json(root.at("workload"));
    } else {
      const auto path = base_dir / root.at("workload_file").get<std::string>();
      std::ifstream in(path);
      if (!in) throw InputError("cannot open workload file " + path.string());
      std::stringstream buf;
      buf << in.rdbuf();
      s.workload = workload::workload_from_json_text(buf.str());
    }

    const json& mode = root.at("mode");
    check_known_fields(mode, {"type", "M", "lambda"}, "mode");
    const std::string type = mode.at("type").get<std::string>();
    if (type == "closed") {
      s.mode = engine::Mode::Closed;
      s.mpl = mode.at("M").get<long>();
    } else if (type == "open") {
      s.mode = engine::Mode::Open;
      s.lambda = mode.at("lambda").get<double>();
    } else {
      throw InputError("mode type must be open or closed");
    }

    if (root.contains("policy"))
      s.policy = policy_from_json(root.at("policy"), s.multiphase);
    if (root.contains("load_control"))
      s.load_control = load_control_from_json(root.at("load_control"));

    s.horizon = root.at("horizon").get<double>();
    s.warmup = root.value("warmup", 0.0);
    s.replications = root.value("replications", 1L);
    s.seed = root.value("seed", std::uint64_t{1});

    if (root.contains("qn")) {
      const json& q = root.at("qn");
      check_known_fields(q, {"demands", "mpl_max"}, "qn");
      analytic::QnSystem qn;
      qn.demands = q.at("demands").get<std::vector<double>>();
      if (q.contains("mpl_max")) qn.mpl_max = q.at("mpl_max").get<long>();
      s.qn = std::move(qn);
    }
    if (root.contains("analyze")) {
      const json& a = root.at("analyze");
      check_known_fields(a, {"lambda_factor", "A"}, "analyze");
      s.lambda_factor = a.value("lambda_factor", s.lambda_factor);
      s.normalized_wait = a.value("A", s.normalized_wait);
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario JSON: ") + e.what());
  }
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str(), path.parent_path());
}

std::string scenario_to_json_text(const Scenario& s) {
  nlohmann::ordered_json j;
  j["workload"] = json::parse(workload::workload_to_json_text(s.workload));
  if (s.mode == engine::Mode::Closed)
    j["mode"] = {{"type", "closed"}, {"M", s.mpl}};
  else
    j["mode"] = {{"type", "open"}, {"lambda", s.lambda}};
  j["policy"] = {{"name", s.policy.name()}};
  j["load_control"] = {{"name", s.load_control.name()}};
  j["horizon"] = s.horizon;
  j["warmup"] = s.warmup;
  j["replications"] = s.replications;
  j["seed"] = s.seed;
  if (s.qn) {
    j["qn"] = {{"demands", s.qn->demands}};
    if (s.qn->mpl_max) j["qn"]["mpl_max"] = *s.qn->mpl_max;
  }
  return j.dump(2);
}

engine::SimConfig sim_config(const Scenario& s, std::uint64_t seed) {
  engine::SimConfig cfg;
  cfg.mode = s.mode;
  cfg.lambda = s.lambda;
  cfg.mpl = s.mpl;
  cfg.horizon = s.horizon;
  cfg.warmup = s.warmup;
  cfg.seed = seed;
  cfg.policy = s.policy;
  cfg.load_control = s.load_control;
  cfg.multiphase = s.multiphase;
  return cfg;
}

}  // namespace clab::scenario
