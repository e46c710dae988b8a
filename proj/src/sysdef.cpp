#include "patchcm/sysdef.hpp"

#include <fstream>

namespace patchcm {

namespace {

Expr parse_field(const nlohmann::json& doc, const std::string& key, const std::string& ctx) {
  if (!doc.is_string())
    throw ValidationError(ctx + "." + key + ": expected an expression string");
  try {
    return parse_expression(doc.get<std::string>());
  } catch (const ParseError& err) {
    throw ValidationError(ctx + "." + key + ": " + err.what());
  }
}

void check_names(const Expr& e, const std::set<std::string>& allowed, const std::string& ctx) {
  for (const auto& name : free_names(e))
    if (!allowed.count(name))
      throw ValidationError(ctx + ": unknown name '" + name +
                            "' (not a declared variable or parameter)");
}

void require_canonical(const nlohmann::json& doc, const char* key,
                       const std::string& prefix, int expected) {
  if (!doc.contains(key)) return;
  const auto& arr = doc.at(key);
  if (static_cast<int>(arr.size()) != expected)
    throw ValidationError(std::string(key) + " must list " + std::to_string(expected) +
                          " names");
  for (int i = 0; i < expected; ++i) {
    std::string want = prefix + std::to_string(i + 1);
    if (prefix == "w") want = i == 0 ? "w1" : "w2";
    if (arr.at(i).get<std::string>() != want)
      throw ValidationError(std::string(key) + "[" + std::to_string(i) +
                            "] must be the canonical name '" + want + "'");
  }
}

ScalarField expr_field(Expr e, std::vector<std::string> names,
                       std::shared_ptr<const std::map<std::string, double>> params) {
  return [e = std::move(e), names = std::move(names),
          params = std::move(params)](std::span<const Jet> args) {
    EvalContext ctx = EvalContext::for_shape(args[0].order(), args[0].nvars(), params.get());
    for (std::size_t i = 0; i < names.size() && i < args.size(); ++i)
      ctx.bind(names[i], args[i]);
    return eval_jet(e, ctx);
  };
}

}  // namespace

Eigen::VectorXd SystemDefinition::reference_at(double w1, double w2) const {
  if (!has_reference()) throw ValidationError("definition has no reference solution");
  Eigen::VectorXd out(reference.size());
  std::map<std::string, double> vars{{"w1", w1}, {"w2", w2}};
  for (std::size_t i = 0; i < reference.size(); ++i)
    out[i] = eval_scalar(reference[i], vars, &params);
  return out;
}

std::shared_ptr<const CartesianCenterSystem> SystemDefinition::center_system(
    double hyperbolicity_tol) const {
  if (kind == Kind::plant_normal_form) return plant().zero_exosystem(hyperbolicity_tol);

  auto shared_params = std::make_shared<const std::map<std::string, double>>(params);
  std::vector<std::string> names{"w1", "w2"};
  for (int i = 0; i < n; ++i) names.push_back("z" + std::to_string(i + 1));
  std::vector<ScalarField> zb;
  for (int i = 0; i < n; ++i) zb.push_back(expr_field(zbar[i], names, shared_params));
  ScalarField pf = expr_field(P, {"w1", "w2"}, shared_params);
  ScalarField qf = expr_field(Q, {"w1", "w2"}, shared_params);
  return std::make_shared<CartesianCenterSystem>(B, std::move(zb), std::move(pf),
                                                 std::move(qf), rotation, hyperbolicity_tol);
}

PlantNormalForm SystemDefinition::plant() const {
  if (kind != Kind::plant_normal_form)
    throw ValidationError("definition '" + name + "' is not a plant in normal form");
  return PlantNormalForm(relative_degree, zdim, f0, input_gain, drift, s, p, params);
}

SystemDefinition parse_system_definition(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("definition must be a JSON object");
  if (doc.value("schema_version", 0) != 1)
    throw ValidationError("definition: unsupported schema version");

  SystemDefinition def;
  def.raw = doc;
  def.name = doc.value("name", "unnamed");

  const std::string kind = doc.value("kind", "");
  if (kind == "center-system")
    def.kind = SystemDefinition::Kind::center_system;
  else if (kind == "plant-normal-form")
    def.kind = SystemDefinition::Kind::plant_normal_form;
  else
    throw ValidationError("definition.kind must be 'center-system' or 'plant-normal-form'");

  if (doc.contains("params")) {
    for (const auto& [key, value] : doc.at("params").items()) {
      if (!value.is_number())
        throw ValidationError("params." + key + " must be a number");
      def.params[key] = value.get<double>();
    }
  }
  std::set<std::string> allowed{"w1", "w2"};
  for (const auto& [key, value] : def.params) allowed.insert(key);

  try {
    if (def.kind == SystemDefinition::Kind::center_system) {
      if (!doc.contains("B") || !doc.contains("Zbar"))
        throw ValidationError("center-system definition needs B and Zbar");
      def.n = static_cast<int>(doc.at("Zbar").size());
      require_canonical(doc, "z", "z", def.n);
      require_canonical(doc, "w", "w", 2);
      for (int i = 0; i < def.n; ++i) allowed.insert("z" + std::to_string(i + 1));

      const auto& bj = doc.at("B");
      if (static_cast<int>(bj.size()) != def.n)
        throw ValidationError("B row count does not match the z dimension");
      def.B.resize(def.n, def.n);
      for (int i = 0; i < def.n; ++i) {
        if (static_cast<int>(bj.at(i).size()) != def.n)
          throw ValidationError("B must be square");
        for (int j = 0; j < def.n; ++j) def.B(i, j) = bj.at(i).at(j).get<double>();
      }
      for (int i = 0; i < def.n; ++i) {
        def.zbar.push_back(parse_field(doc.at("Zbar").at(i), "Zbar[" + std::to_string(i) + "]",
                                       "definition"));
        check_names(def.zbar.back(), allowed, "Zbar[" + std::to_string(i) + "]");
      }
      def.P = parse_field(doc.value("P", nlohmann::json("0")), "P", "definition");
      def.Q = parse_field(doc.value("Q", nlohmann::json("0")), "Q", "definition");
      std::set<std::string> wonly{"w1", "w2"};
      for (const auto& [key, value] : def.params) wonly.insert(key);
      check_names(def.P, wonly, "P");
      check_names(def.Q, wonly, "Q");
      def.rotation = doc.value("rotation", 1);
      if (def.rotation != 1 && def.rotation != -1)
        throw ValidationError("rotation must be 1 or -1");
    } else {
      def.relative_degree = doc.value("relative_degree", 0);
      if (def.relative_degree < 1) throw ValidationError("relative_degree must be >= 1");
      if (!doc.contains("f0")) throw ValidationError("plant definition needs f0");
      def.zdim = static_cast<int>(doc.at("f0").size());
      require_canonical(doc, "z", "z", def.zdim);
      require_canonical(doc, "xi", "xi", def.relative_degree);
      require_canonical(doc, "w", "w", 2);
      std::set<std::string> state = allowed;
      for (int i = 0; i < def.zdim; ++i) state.insert("z" + std::to_string(i + 1));
      for (int i = 0; i < def.relative_degree; ++i) state.insert("xi" + std::to_string(i + 1));
      for (int i = 0; i < def.zdim; ++i) {
        def.f0.push_back(parse_field(doc.at("f0").at(i), "f0[" + std::to_string(i) + "]",
                                     "definition"));
        check_names(def.f0.back(), state, "f0[" + std::to_string(i) + "]");
      }
      def.input_gain =
          parse_field(doc.value("input_gain", nlohmann::json("1")), "input_gain", "definition");
      def.drift = parse_field(doc.value("drift", nlohmann::json("0")), "drift", "definition");
      check_names(def.input_gain, state, "input_gain");
      check_names(def.drift, state, "drift");
      if (!doc.contains("s") || doc.at("s").size() != 2)
        throw ValidationError("plant definition needs a two-component exosystem s");
      def.s[0] = parse_field(doc.at("s").at(0), "s[0]", "definition");
      def.s[1] = parse_field(doc.at("s").at(1), "s[1]", "definition");
      def.p = parse_field(doc.value("p", nlohmann::json("0")), "p", "definition");
      std::set<std::string> wonly{"w1", "w2"};
      for (const auto& [key, value] : def.params) wonly.insert(key);
      check_names(def.s[0], wonly, "s[0]");
      check_names(def.s[1], wonly, "s[1]");
      check_names(def.p, wonly, "p");
    }

    if (doc.contains("reference")) {
      std::set<std::string> wonly{"w1", "w2"};
      for (const auto& [key, value] : def.params) wonly.insert(key);
      const int dim = def.manifold_dim();
      if (static_cast<int>(doc.at("reference").size()) != dim)
        throw ValidationError("reference must have one expression per z component");
      for (int i = 0; i < dim; ++i) {
        def.reference.push_back(parse_field(doc.at("reference").at(i),
                                            "reference[" + std::to_string(i) + "]",
                                            "definition"));
        check_names(def.reference.back(), wonly, "reference[" + std::to_string(i) + "]");
      }
    }

    if (doc.contains("grid")) {
      const auto& g = doc.at("grid");
      def.grid.specified = true;
      def.grid.w1_lo = g.at("w1").at(0).get<double>();
      def.grid.w1_hi = g.at("w1").at(1).get<double>();
      def.grid.w2_lo = g.at("w2").at(0).get<double>();
      def.grid.w2_hi = g.at("w2").at(1).get<double>();
      def.grid.samples = g.value("samples", 101);
    }
  } catch (const nlohmann::json::exception& err) {
    throw ValidationError(std::string("malformed definition document: ") + err.what());
  }
  return def;
}

SystemDefinition load_system_definition(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open definition file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(err.byte, std::string("definition '") + path + "': " + err.what());
  }
  return parse_system_definition(doc);
}

}  // namespace patchcm
