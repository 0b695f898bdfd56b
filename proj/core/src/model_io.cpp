#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <system_error>

#include <json.hpp>

#include "mfai/io.hpp"
#include "mfai/model.hpp"

namespace mfai {

namespace {

using json = nlohmann::ordered_json;

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw std::runtime_error(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

double parse_decimal(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::runtime_error("bad decimal threshold '" + s + "'");
  }
  return v;
}

const char* side_name(Side s) { return s == Side::left ? "left" : "right"; }

Side side_from(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw std::runtime_error("bad side '" + s + "'");
}

json rule_json(const SplitRule& r) {
  json out;
  out["var"] = r.var;
  out["kind"] = std::string(to_string(r.kind));
  if (r.kind == ColumnKind::numeric) {
    out["threshold"] = format_number(r.threshold);
    out["below"] = side_name(r.below);
  } else {
    out["left_levels"] = r.left_levels;
    out["right_levels"] = r.right_levels;
  }
  return out;
}

SplitRule rule_from(const json& j) {
  SplitRule r;
  r.var = j.at("var").get<std::size_t>();
  r.kind = column_kind_from_string(j.at("kind").get<std::string>());
  if (r.kind == ColumnKind::numeric) {
    r.threshold = parse_decimal(j.at("threshold").get<std::string>());
    r.below = side_from(j.at("below"));
  } else {
    r.left_levels = j.at("left_levels").get<std::vector<int>>();
    r.right_levels = j.at("right_levels").get<std::vector<int>>();
  }
  return r;
}

json tree_json(const RegressionTree& tree) {
  json nodes = json::array();
  for (const auto& node : tree.nodes()) {
    json n;
    n["value"] = node.value;
    n["n_train"] = node.n_train;
    if (!node.is_leaf()) {
      n["rule"] = rule_json(node.rule);
      n["goodness"] = node.goodness;
      n["majority"] = side_name(node.majority);
      json sur = json::array();
      for (const auto& s : node.surrogates) {
        sur.push_back({{"rule", rule_json(s.rule)},
                       {"agreement", s.agreement},
                       {"adjusted_goodness", s.adjusted_goodness}});
      }
      n["surrogates"] = std::move(sur);
      n["left"] = node.left;
      n["right"] = node.right;
    }
    nodes.push_back(std::move(n));
  }
  return nodes;
}

RegressionTree tree_from(const json& j, std::size_t n_covariates) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j) {
    TreeNode node;
    node.value = n.at("value").get<double>();
    node.n_train = n.at("n_train").get<std::size_t>();
    if (n.contains("rule")) {
      node.rule = rule_from(n.at("rule"));
      node.goodness = n.at("goodness").get<double>();
      node.majority = side_from(n.at("majority"));
      for (const auto& s : n.at("surrogates")) {
        node.surrogates.push_back({rule_from(s.at("rule")), s.at("agreement").get<double>(),
                                   s.at("adjusted_goodness").get<double>()});
      }
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    nodes.push_back(std::move(node));
  }
  return RegressionTree(std::move(nodes), n_covariates);
}

}  // namespace

std::string format_model(const MfaiModel& model) {
  json doc;
  doc["version"] = kModelFormatVersion;
  doc["n"] = model.n;
  doc["m"] = model.m;
  doc["c"] = model.c;
  doc["k"] = model.k();
  doc["noise_mode"] = std::string(to_string(model.noise_mode));
  json schema = json::array();
  for (const auto& spec : model.schema) {
    json item = {{"name", spec.name}, {"kind", std::string(to_string(spec.kind))}};
    if (spec.kind == ColumnKind::categorical) item["levels"] = spec.levels;
    schema.push_back(std::move(item));
  }
  doc["schema"] = std::move(schema);
  json factors = json::array();
  for (const auto& s : model.factors) {
    json f;
    f["mu"] = vector_json(s.mu);
    f["a2"] = vector_json(s.a2);
    f["nu"] = vector_json(s.nu);
    f["b2"] = vector_json(s.b2);
    f["tau"] = vector_json(s.tau);
    f["beta"] = s.beta;
    f["iterations"] = s.iterations;
    f["converged"] = s.converged;
    f["elbo_trace"] = s.elbo_trace;
    json stages = json::array();
    for (const auto& st : s.f.stages()) {
      stages.push_back({{"shrinkage", st.shrinkage}, {"nodes", tree_json(*st.tree)}});
    }
    f["ensemble"] = std::move(stages);
    factors.push_back(std::move(f));
  }
  doc["factors"] = std::move(factors);
  if (!model.backfit_trace.empty()) doc["backfit_trace"] = model.backfit_trace;
  return doc.dump(1) + "\n";
}

MfaiModel parse_model(std::string_view json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 1, e.what());
  }
  try {
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw std::runtime_error("unsupported model version " + std::to_string(version));
    }
    MfaiModel model;
    model.n = doc.at("n").get<std::size_t>();
    model.m = doc.at("m").get<std::size_t>();
    model.c = doc.at("c").get<std::size_t>();
    model.noise_mode = noise_mode_from_string(doc.at("noise_mode").get<std::string>());
    for (const auto& item : doc.at("schema")) {
      ColumnSpec spec;
      spec.name = item.at("name").get<std::string>();
      spec.kind = column_kind_from_string(item.at("kind").get<std::string>());
      if (item.contains("levels")) spec.levels = item.at("levels").get<std::vector<std::string>>();
      model.schema.push_back(std::move(spec));
    }
    if (model.schema.size() != model.c) throw std::runtime_error("schema size differs from c");
    const auto n = static_cast<Eigen::Index>(model.n);
    const auto m = static_cast<Eigen::Index>(model.m);
    for (const auto& f : doc.at("factors")) {
      FactorState s;
      s.mu = vector_from(f.at("mu"), "mu");
      s.a2 = vector_from(f.at("a2"), "a2");
      s.nu = vector_from(f.at("nu"), "nu");
      s.b2 = vector_from(f.at("b2"), "b2");
      s.tau = vector_from(f.at("tau"), "tau");
      s.beta = f.at("beta").get<double>();
      s.iterations = f.at("iterations").get<std::size_t>();
      s.converged = f.at("converged").get<bool>();
      s.elbo_trace = f.at("elbo_trace").get<std::vector<double>>();
      if (s.mu.size() != n || s.a2.size() != n || s.nu.size() != m || s.b2.size() != m) {
        throw std::runtime_error("factor vectors do not match n and m");
      }
      const auto want_tau = model.noise_mode == NoiseMode::shared ? 1 : m;
      if (s.tau.size() != want_tau) throw std::runtime_error("tau has the wrong length");
      s.f = TreeEnsemble(model.c);
      for (const auto& st : f.at("ensemble")) {
        s.f.push(tree_from(st.at("nodes"), model.c), st.at("shrinkage").get<double>());
      }
      model.factors.push_back(std::move(s));
    }
    if (model.factors.size() != doc.at("k").get<std::size_t>()) {
      throw std::runtime_error("k differs from the number of factor records");
    }
    if (doc.contains("backfit_trace")) {
      model.backfit_trace = doc.at("backfit_trace").get<std::vector<double>>();
    }
    return model;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(source, 1, std::string("invalid model: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const MfaiModel& model) {
  write_text_file(path, format_model(model));
}

MfaiModel load_model(const std::filesystem::path& path) {
  return parse_model(read_text_file(path), path.string());
}

}  // namespace mfai
