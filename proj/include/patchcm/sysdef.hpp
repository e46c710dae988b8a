#pragma once

#include <json.hpp>
#include <memory>
#include <optional>
#include <string>

#include "patchcm/systems.hpp"

namespace patchcm {

struct GridSpec {
  double w1_lo = 0, w1_hi = 0, w2_lo = 0, w2_hi = 0;
  int samples = 101;
  bool specified = false;
};

/// Parsed system-definition document (schema_version 1). Canonical variable
/// names are enforced: w1, w2 for the exosystem, z1..zn for the internal
/// states and xi1..xir for the output chain of a plant in normal form.
class SystemDefinition {
 public:
  enum class Kind { center_system, plant_normal_form };

  std::string name;
  Kind kind = Kind::center_system;
  std::map<std::string, double> params;
  GridSpec grid;
  nlohmann::json raw;

  // center-system payload
  int n = 0;
  Eigen::MatrixXd B;
  std::vector<Expr> zbar;
  Expr P, Q;
  int rotation = 1;

  // plant-normal-form payload
  int relative_degree = 0;
  int zdim = 0;
  std::vector<Expr> f0;
  Expr input_gain, drift;
  std::array<Expr, 2> s;
  Expr p;

  // optional reference solution z = ref(w1, w2) in user coordinates
  std::vector<Expr> reference;

  bool has_reference() const { return !reference.empty(); }
  Eigen::VectorXd reference_at(double w1, double w2) const;

  /// z-dimension of the center-manifold problem this definition induces.
  int manifold_dim() const { return kind == Kind::center_system ? n : zdim; }

  /// The center-manifold system: the definition itself for center-system
  /// kind, the zero dynamics driven through varphi(w) for a plant.
  std::shared_ptr<const CartesianCenterSystem> center_system(
      double hyperbolicity_tol = 1e-6) const;

  /// Plant accessor; throws ValidationError for center-system definitions.
  PlantNormalForm plant() const;
};

SystemDefinition parse_system_definition(const nlohmann::json& doc);
SystemDefinition load_system_definition(const std::string& path);

}  // namespace patchcm
