#include "optstop/config.hpp"

#include "optstop/error.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace optstop {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kModelKeys = {
    {"brownian", {"dim", "correlation", "orientation", "factor"}},
    {"gbm", {"dim", "spot", "drift", "vol", "correlation", "orientation", "factor"}},
    {"dupire",
     {"dim", "spot", "rate", "dividend", "coarse_steps", "lv_level", "lv_decay", "lv_bump", "lv_time_decay",
      "lv_width"}},
    {"ratio", {"spot", "rate", "vol", "window"}},
};

const std::map<std::string, std::set<std::string>> kPayoffKeys = {
    {"bm_put", {"rate", "vol", "chi", "strike", "scaling"}},
    {"geometric_put", {"rate", "strike"}},
    {"geometric_call", {"rate", "strike"}},
    {"max_call", {"rate", "strike"}},
    {"strangle_spread", {"rate", "strikes"}},
    {"basket_put_exp", {"rate", "strike"}},
    {"ratio_last", {"rate"}},
};

const std::map<std::string, std::vector<std::string>> kModelRequired = {
    {"brownian", {"dim"}},
    {"gbm", {"dim", "spot", "vol"}},
    {"dupire", {"dim", "spot", "rate"}},
    {"ratio", {"rate", "vol"}},
};

const std::map<std::string, std::vector<std::string>> kPayoffRequired = {
    {"bm_put", {"vol", "chi", "strike"}},   {"geometric_put", {"strike"}}, {"geometric_call", {"strike"}},
    {"max_call", {"strike"}},               {"strangle_spread", {"strikes"}}, {"basket_put_exp", {"strike"}},
    {"ratio_last", {}},
};

const std::set<std::string> kTopKeys = {"name", "seed", "output"};
const std::set<std::string> kGridKeys = {"T", "N"};
const std::set<std::string> kNetworkKeys = {"hidden1", "hidden2", "bn_input", "bn_hidden",
                                            "bn_output", "bn_eps", "bn_momentum", "step0"};
const std::set<std::string> kTrainingKeys = {"M", "J_m", "gamma", "zeta1", "zeta2",
                                             "eps", "optimizer", "keep_best", "log_every"};
const std::set<std::string> kEvaluationKeys = {"J0", "repeats", "chunk"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = boost::trim_copy(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
}

std::uint64_t to_unsigned(const std::string& key, const std::string& text) {
  const std::string t = boost::trim_copy(text);
  try {
    std::size_t used = 0;
    if (!t.empty() && t[0] != '-') {
      const unsigned long long v = std::stoull(t, &used);
      if (used == t.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + text + "'");
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = boost::to_lower_copy(boost::trim_copy(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + text + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(to_double(key, p));
  return out;
}

std::vector<std::vector<double>> to_matrix(const std::string& key, const std::string& text) {
  std::vector<std::string> rows;
  boost::split(rows, text, boost::is_any_of(";"));
  std::vector<std::vector<double>> out;
  for (const auto& r : rows) out.push_back(to_list(key, r));
  return out;
}

PiecewiseSchedule to_schedule(const std::string& key, const std::string& text) {
  try {
    return parse_schedule(text);
  } catch (const InvalidArgument& e) {
    throw ConfigError("config: '" + key + "': " + e.what());
  }
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

// Section access with unknown-key detection.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }
  std::string text(const std::string& key) const { return tree_->get<std::string>(key); }
  std::string full(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  void check_keys(const std::set<std::string>& allowed) const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!allowed.count(key)) throw ConfigError("config: unknown key '" + full(key) + "'");
      if (!child.empty()) throw ConfigError("config: '" + full(key) + "' must be a value, not a section");
    }
  }

  template <typename T, typename F>
  void read(const std::string& key, T& field, F convert) const {
    if (has(key)) field = convert(full(key), text(key));
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
};

const pt::ptree* child_section(const pt::ptree& root, const std::string& name) {
  auto it = root.find(name);
  if (it == root.not_found()) return nullptr;
  return &it->second;
}

void require_positive(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

}  // namespace

void finalize_config(ExperimentConfig& cfg) {
  ModelSection& m = cfg.model;
  if (!kModelKeys.count(m.kind)) throw ConfigError("config: unknown model kind '" + m.kind + "'");
  PayoffSection& p = cfg.payoff;
  if (!kPayoffKeys.count(p.kind)) throw ConfigError("config: unknown payoff kind '" + p.kind + "'");
  require_positive(cfg.maturity > 0.0, "grid.T must be positive");
  require_positive(cfg.steps >= 1, "grid.N must be at least 1");

  const ModelSection defaults;
  if (m.kind == "ratio") {
    m.dim = m.window;
    if (m.spot.empty()) m.spot = {1.0};
    require_positive(m.spot.size() == 1, "model.spot takes one value for kind ratio");
    require_positive(m.vol.size() == 1, "model.vol takes one value for kind ratio");
    require_positive(m.window >= 1, "model.window must be at least 1");
  }
  require_positive(m.dim >= 1, "model.dim must be at least 1");
  auto broadcast = [&](std::vector<double>& v, const char* key, bool allow_empty) {
    if (v.empty() && allow_empty) return;
    if (v.size() == 1) v.assign(m.dim, v[0]);
    if (v.size() != m.dim) {
      throw ConfigError(std::string("config: model.") + key + " has " + std::to_string(v.size()) +
                        " entries, expected 1 or " + std::to_string(m.dim));
    }
  };
  if (m.kind != "ratio") {
    if (m.kind == "gbm" || m.kind == "dupire") broadcast(m.spot, "spot", false);
    if (m.kind == "gbm") {
      if (m.drift.empty()) m.drift = {0.0};
      broadcast(m.drift, "drift", false);
      broadcast(m.vol, "vol", false);
    }
  }
  if (m.orientation != "factor_adjoint" && m.orientation != "adjoint_factor") {
    throw ConfigError("config: model.orientation must be factor_adjoint or adjoint_factor");
  }
  if (!m.factor.empty()) {
    require_positive(m.factor.size() == m.dim, "model.factor must have one row per asset");
    for (const auto& row : m.factor) require_positive(row.size() == m.dim, "model.factor rows must have dim entries");
    require_positive(m.correlation == 0.0, "model.factor and model.correlation are exclusive");
  }
  if (m.kind == "dupire") {
    require_positive(m.coarse_steps >= 1, "model.coarse_steps must be at least 1");
    if (cfg.steps % m.coarse_steps != 0 && m.coarse_steps % cfg.steps != 0) {
      throw ConfigError("config: grid.N and model.coarse_steps must divide one another");
    }
  }
  // reset everything the kind does not use so equal models compare equal
  const auto& allowed = kModelKeys.at(m.kind);
  auto clear = [&](const char* key, auto& field, const auto& value) {
    if (!allowed.count(key)) field = value;
  };
  if (m.kind != "ratio") clear("dim", m.dim, defaults.dim);
  clear("spot", m.spot, defaults.spot);
  clear("drift", m.drift, defaults.drift);
  clear("vol", m.vol, defaults.vol);
  clear("rate", m.rate, defaults.rate);
  clear("dividend", m.dividend, defaults.dividend);
  clear("correlation", m.correlation, defaults.correlation);
  clear("orientation", m.orientation, defaults.orientation);
  clear("factor", m.factor, defaults.factor);
  clear("coarse_steps", m.coarse_steps, defaults.coarse_steps);
  clear("lv_level", m.lv_level, defaults.lv_level);
  clear("lv_decay", m.lv_decay, defaults.lv_decay);
  clear("lv_bump", m.lv_bump, defaults.lv_bump);
  clear("lv_time_decay", m.lv_time_decay, defaults.lv_time_decay);
  clear("lv_width", m.lv_width, defaults.lv_width);
  clear("window", m.window, defaults.window);
  if (m.kind == "ratio") m.dim = m.window;

  const PayoffSection pdefaults;
  const auto& pallowed = kPayoffKeys.at(p.kind);
  auto pclear = [&](const char* key, auto& field, const auto& value) {
    if (!pallowed.count(key)) field = value;
  };
  pclear("strike", p.strike, pdefaults.strike);
  pclear("vol", p.vol, pdefaults.vol);
  pclear("chi", p.chi, pdefaults.chi);
  pclear("scaling", p.scaling, pdefaults.scaling);
  pclear("strikes", p.strikes, pdefaults.strikes);
  if (p.kind == "strangle_spread") require_positive(p.strikes.size() == 4, "payoff.strikes needs four strikes");
  if (p.scaling != "inverse_sqrt" && p.scaling != "ten_over_dim") {
    throw ConfigError("config: payoff.scaling must be inverse_sqrt or ten_over_dim");
  }

  NetworkSection& n = cfg.network;
  if (n.hidden1 == 0) n.hidden1 = m.dim + 40;
  if (n.hidden2 == 0) n.hidden2 = m.dim + 40;
  require_positive(n.bn_eps > 0.0, "network.bn_eps must be positive");
  require_positive(n.bn_momentum >= 0.0 && n.bn_momentum < 1.0, "network.bn_momentum must lie in [0, 1)");

  try {
    build_run(cfg).validate();
    validate_payoff(build_payoff(cfg));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require_positive(cfg.evaluation.repeats >= 1, "evaluation.repeats must be at least 1");
}

ExperimentConfig parse_config(std::string_view text) {
  pt::ptree root;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  ExperimentConfig cfg;
  const std::set<std::string> sections = {"model", "payoff", "grid", "network", "training", "evaluation"};
  for (const auto& [key, child] : root) {
    if (child.empty()) {
      if (!kTopKeys.count(key)) {
        if (sections.count(key)) continue;  // empty section
        throw ConfigError("config: unknown key '" + key + "'");
      }
    } else if (!sections.count(key)) {
      throw ConfigError("config: unknown section '" + key + "'");
    }
  }
  const Section top(&root, "");
  top.read("name", cfg.name, [](const std::string&, const std::string& v) { return v; });
  top.read("seed", cfg.seed, to_unsigned);
  top.read("output", cfg.output, [](const std::string&, const std::string& v) { return v; });

  const Section model(child_section(root, "model"), "model");
  const Section payoff(child_section(root, "payoff"), "payoff");
  const Section grid(child_section(root, "grid"), "grid");

  std::vector<std::string> missing;
  if (!model.has("kind")) missing.push_back("model.kind");
  if (!payoff.has("kind")) missing.push_back("payoff.kind");
  if (!grid.has("T")) missing.push_back("grid.T");
  if (!grid.has("N")) missing.push_back("grid.N");
  if (model.has("kind")) {
    const std::string kind = model.text("kind");
    if (!kModelKeys.count(kind)) throw ConfigError("config: unknown model kind '" + kind + "'");
    for (const auto& key : kModelRequired.at(kind)) {
      if (!model.has(key)) missing.push_back("model." + key);
    }
  }
  if (payoff.has("kind")) {
    const std::string kind = payoff.text("kind");
    if (!kPayoffKeys.count(kind)) throw ConfigError("config: unknown payoff kind '" + kind + "'");
    for (const auto& key : kPayoffRequired.at(kind)) {
      if (!payoff.has(key)) missing.push_back("payoff." + key);
    }
  }
  if (!missing.empty()) {
    throw ConfigError("config: missing required keys: " + boost::join(missing, ", "));
  }

  ModelSection& m = cfg.model;
  m.kind = model.text("kind");
  {
    auto allowed = kModelKeys.at(m.kind);
    allowed.insert("kind");
    model.check_keys(allowed);
  }
  model.read("dim", m.dim, to_unsigned);
  model.read("spot", m.spot, to_list);
  model.read("drift", m.drift, to_list);
  model.read("vol", m.vol, to_list);
  model.read("rate", m.rate, to_double);
  model.read("dividend", m.dividend, to_double);
  model.read("correlation", m.correlation, to_double);
  model.read("orientation", m.orientation, [](const std::string&, const std::string& v) { return boost::trim_copy(v); });
  model.read("factor", m.factor, to_matrix);
  model.read("coarse_steps", m.coarse_steps, to_unsigned);
  model.read("lv_level", m.lv_level, to_double);
  model.read("lv_decay", m.lv_decay, to_double);
  model.read("lv_bump", m.lv_bump, to_double);
  model.read("lv_time_decay", m.lv_time_decay, to_double);
  model.read("lv_width", m.lv_width, to_double);
  model.read("window", m.window, to_unsigned);

  PayoffSection& p = cfg.payoff;
  p.kind = payoff.text("kind");
  {
    auto allowed = kPayoffKeys.at(p.kind);
    allowed.insert("kind");
    payoff.check_keys(allowed);
  }
  payoff.read("rate", p.rate, to_double);
  payoff.read("strike", p.strike, to_double);
  payoff.read("vol", p.vol, to_double);
  payoff.read("chi", p.chi, to_double);
  payoff.read("scaling", p.scaling, [](const std::string&, const std::string& v) { return boost::trim_copy(v); });
  payoff.read("strikes", p.strikes, to_list);

  grid.check_keys(kGridKeys);
  grid.read("T", cfg.maturity, to_double);
  grid.read("N", cfg.steps, to_unsigned);

  const Section network(child_section(root, "network"), "network");
  network.check_keys(kNetworkKeys);
  NetworkSection& n = cfg.network;
  network.read("hidden1", n.hidden1, to_unsigned);
  network.read("hidden2", n.hidden2, to_unsigned);
  network.read("bn_input", n.bn_input, to_bool);
  network.read("bn_hidden", n.bn_hidden, to_bool);
  network.read("bn_output", n.bn_output, to_bool);
  network.read("bn_eps", n.bn_eps, to_double);
  network.read("bn_momentum", n.bn_momentum, to_double);
  if (network.has("step0")) {
    const std::string v = boost::trim_copy(network.text("step0"));
    if (v != "trainable" && v != "frozen") throw ConfigError("config: network.step0 must be trainable or frozen");
    n.step0_trainable = v == "trainable";
  }

  const Section training(child_section(root, "training"), "training");
  training.check_keys(kTrainingKeys);
  TrainingSection& t = cfg.training;
  training.read("M", t.steps, to_unsigned);
  training.read("J_m", t.batch, to_schedule);
  training.read("gamma", t.rate, to_schedule);
  training.read("zeta1", t.zeta1, to_double);
  training.read("zeta2", t.zeta2, to_double);
  training.read("eps", t.eps, to_double);
  training.read("keep_best", t.keep_best, to_bool);
  training.read("log_every", t.log_every, to_unsigned);
  if (training.has("optimizer")) {
    const std::string v = boost::trim_copy(training.text("optimizer"));
    if (v != "adam" && v != "sgd") throw ConfigError("config: training.optimizer must be adam or sgd");
    t.plain_sgd = v == "sgd";
  }

  const Section evaluation(child_section(root, "evaluation"), "evaluation");
  evaluation.check_keys(kEvaluationKeys);
  EvaluationSection& e = cfg.evaluation;
  evaluation.read("J0", e.paths, to_unsigned);
  evaluation.read("repeats", e.repeats, to_unsigned);
  evaluation.read("chunk", e.chunk, to_unsigned);

  finalize_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "name = " << cfg.name << "\nseed = " << cfg.seed << "\noutput = " << cfg.output << "\n";
  const ModelSection& m = cfg.model;
  const auto& allowed = kModelKeys.at(m.kind);
  out << "\n[model]\nkind = " << m.kind << "\n";
  auto emit = [&](const char* key, const std::string& value) {
    if (allowed.count(key)) out << key << " = " << value << "\n";
  };
  emit("dim", std::to_string(m.dim));
  emit("spot", join(m.kind == "ratio" ? m.spot : m.spot));
  if (!m.drift.empty()) emit("drift", join(m.drift));
  if (!m.vol.empty()) emit("vol", join(m.vol));
  emit("rate", fmt(m.rate));
  emit("dividend", fmt(m.dividend));
  if (m.factor.empty()) emit("correlation", fmt(m.correlation));
  emit("orientation", m.orientation);
  if (!m.factor.empty()) {
    std::string rows;
    for (std::size_t i = 0; i < m.factor.size(); ++i) rows += (i ? "; " : "") + join(m.factor[i]);
    emit("factor", rows);
  }
  emit("coarse_steps", std::to_string(m.coarse_steps));
  emit("lv_level", fmt(m.lv_level));
  emit("lv_decay", fmt(m.lv_decay));
  emit("lv_bump", fmt(m.lv_bump));
  emit("lv_time_decay", fmt(m.lv_time_decay));
  emit("lv_width", fmt(m.lv_width));
  emit("window", std::to_string(m.window));

  const PayoffSection& p = cfg.payoff;
  const auto& pallowed = kPayoffKeys.at(p.kind);
  out << "\n[payoff]\nkind = " << p.kind << "\n";
  auto pemit = [&](const char* key, const std::string& value) {
    if (pallowed.count(key)) out << key << " = " << value << "\n";
  };
  pemit("rate", fmt(p.rate));
  pemit("strike", fmt(p.strike));
  pemit("vol", fmt(p.vol));
  pemit("chi", fmt(p.chi));
  pemit("scaling", p.scaling);
  pemit("strikes", join(p.strikes));

  out << "\n[grid]\nT = " << fmt(cfg.maturity) << "\nN = " << cfg.steps << "\n";
  const NetworkSection& n = cfg.network;
  out << "\n[network]\nhidden1 = " << n.hidden1 << "\nhidden2 = " << n.hidden2
      << "\nbn_input = " << (n.bn_input ? "true" : "false") << "\nbn_hidden = " << (n.bn_hidden ? "true" : "false")
      << "\nbn_output = " << (n.bn_output ? "true" : "false") << "\nbn_eps = " << fmt(n.bn_eps)
      << "\nbn_momentum = " << fmt(n.bn_momentum) << "\nstep0 = " << (n.step0_trainable ? "trainable" : "frozen")
      << "\n";
  const TrainingSection& t = cfg.training;
  out << "\n[training]\nM = " << t.steps << "\nJ_m = " << format_schedule(t.batch)
      << "\ngamma = " << format_schedule(t.rate) << "\nzeta1 = " << fmt(t.zeta1) << "\nzeta2 = " << fmt(t.zeta2)
      << "\neps = " << fmt(t.eps) << "\noptimizer = " << (t.plain_sgd ? "sgd" : "adam")
      << "\nkeep_best = " << (t.keep_best ? "true" : "false") << "\nlog_every = " << t.log_every << "\n";
  const EvaluationSection& e = cfg.evaluation;
  out << "\n[evaluation]\nJ0 = " << e.paths << "\nrepeats = " << e.repeats << "\nchunk = " << e.chunk << "\n";
  return out.str();
}

ModelSpec build_model(const ExperimentConfig& cfg) {
  const ModelSection& m = cfg.model;
  const auto orientation =
      m.orientation == "adjoint_factor" ? FactorOrientation::kAdjointTimesFactor : FactorOrientation::kFactorTimesAdjoint;
  Eigen::MatrixXd loadings;
  if (!m.factor.empty()) {
    const auto d = static_cast<Eigen::Index>(m.dim);
    loadings.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) {
        loadings(i, k) = m.factor[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      }
    }
  } else if (m.correlation != 0.0) {
    try {
      loadings = CorrelationSpec::equicorrelated(m.dim, m.correlation, orientation).loadings;
    } catch (const DecompositionError& e) {
      throw ConfigError(std::string("config: model.correlation: ") + e.what());
    }
  }
  if (m.kind == "brownian") return BrownianScaled{m.dim, loadings};
  if (m.kind == "gbm") return GbmExact{m.spot, m.drift, m.vol, loadings};
  if (m.kind == "dupire") {
    DupireLogEuler dup;
    dup.initial = m.spot;
    dup.rate = m.rate;
    dup.dividend = m.dividend;
    dup.coarse_steps = m.coarse_steps;
    const double spot0 = m.spot.front();
    const double rate = m.rate;
    const double level = m.lv_level, decay = m.lv_decay, bump = m.lv_bump;
    const double time_decay = m.lv_time_decay, width = m.lv_width;
    dup.local_vol = [=](double t, double s) {
      const double shift = std::exp(rate * t) * s - spot0;
      return level * std::exp(-decay * std::sqrt(t)) * (bump - std::exp(-time_decay * t - width * shift * shift));
    };
    return dup;
  }
  RatioPath ratio;
  ratio.initial = m.spot.front();
  ratio.rate = m.rate;
  ratio.vol = m.vol.front();
  ratio.window = m.window;
  return ratio;
}

PayoffSpec build_payoff(const ExperimentConfig& cfg) {
  const PayoffSection& p = cfg.payoff;
  const std::size_t d = cfg.model.dim;
  if (p.kind == "bm_put") {
    return BmPutType{p.rate, p.vol, p.chi, p.strike,
                     p.scaling == "ten_over_dim" ? BrownianScaling::kTenOverDim : BrownianScaling::kInverseSqrt, d};
  }
  if (p.kind == "geometric_put") return GeometricPut{p.rate, p.strike, d};
  if (p.kind == "geometric_call") return GeometricCall{p.rate, p.strike, d};
  if (p.kind == "max_call") return MaxCall{p.rate, p.strike, d};
  if (p.kind == "strangle_spread") {
    StrangleSpread s;
    s.rate = p.rate;
    s.dim = d;
    if (p.strikes.size() == 4) std::copy(p.strikes.begin(), p.strikes.end(), s.strikes.begin());
    return s;
  }
  if (p.kind == "basket_put_exp") return BasketPutOnExpLog{p.rate, p.strike, d};
  return RatioLast{p.rate, d};
}

TimeGrid build_grid(const ExperimentConfig& cfg) { return make_grid(cfg.maturity, cfg.steps); }

NetworkLayout build_layout(const ExperimentConfig& cfg) {
  NetworkLayout layout;
  layout.input = cfg.model.dim;
  layout.hidden1 = cfg.network.hidden1 ? cfg.network.hidden1 : cfg.model.dim + 40;
  layout.hidden2 = cfg.network.hidden2 ? cfg.network.hidden2 : cfg.model.dim + 40;
  layout.bn_input = cfg.network.bn_input;
  layout.bn_hidden = cfg.network.bn_hidden;
  layout.bn_output = cfg.network.bn_output;
  layout.bn_eps = cfg.network.bn_eps;
  layout.bn_momentum = cfg.network.bn_momentum;
  return layout;
}

TrainRunConfig build_run(const ExperimentConfig& cfg) {
  TrainRunConfig run;
  run.steps = cfg.training.steps;
  run.batch = cfg.training.batch;
  run.eval_paths = cfg.evaluation.paths;
  run.eval_chunk = cfg.evaluation.chunk;
  run.seed = cfg.seed;
  run.log_every = cfg.training.log_every;
  run.keep_best = cfg.training.keep_best;
  run.step0_trainable = cfg.network.step0_trainable;
  run.adam.zeta1 = cfg.training.zeta1;
  run.adam.zeta2 = cfg.training.zeta2;
  run.adam.eps = cfg.training.eps;
  run.adam.rate = cfg.training.rate;
  run.adam.plain_sgd = cfg.training.plain_sgd;
  return run;
}

}  // namespace optstop
