// Operator sets describing one open-system model: Hamiltonian, diffusive
// channels, counting (jump) channels, and the scaled jump channels whose
// operators carry the large local-oscillator offset I/epsilon.
#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsme/types.hpp"

namespace qsme {

inline constexpr double kHermOpTol = 1e-12;
inline constexpr double kConditionTol = 1e-12;

struct Observable {
  std::string label;
  Mat matrix;

  void validate() const {
    require_square(matrix, "Observable");
    if (hermiticity_defect(matrix) > kHermOpTol)
      throw Error("Observable '" + label + "' is not Hermitian");
  }
};

struct LabeledOp {
  std::string label;
  Mat matrix;
};

/// Model data for the generic jump-diffusion master equation. Jump channels
/// split into unscaled ones (jump_ops, operators D_i) and scaled ones
/// (scaled_jump_ops, base operators A_j); the effective operator of a scaled
/// channel is A_j + I/epsilon.
struct OperatorSet {
  Mat hamiltonian;
  std::vector<Mat> diffusive_ops;         // C_i
  std::vector<LabeledOp> jump_ops;        // unscaled D_i
  std::vector<LabeledOp> scaled_jump_ops; // bases A_j of the scaled channels
  double epsilon = 0.0;

  int dim() const { return static_cast<int>(hamiltonian.rows()); }

  Mat scaled_op(std::size_t j) const {
    if (j >= scaled_jump_ops.size())
      throw Error("OperatorSet: scaled channel index out of range");
    if (epsilon <= 0.0)
      throw Error("OperatorSet: epsilon must be positive for scaled channels");
    return scaled_jump_ops[j].matrix +
           Mat(identity(dim()) / epsilon);
  }

  void validate() const {
    require_square(hamiltonian, "OperatorSet.H");
    if (hermiticity_defect(hamiltonian) > kHermOpTol)
      throw Error("OperatorSet: Hamiltonian is not Hermitian");
    const int n = dim();
    auto check_dim = [&](const Mat& m, const std::string& what) {
      require_square(m, what.c_str());
      if (m.rows() != n)
        throw Error("OperatorSet: " + what + " has dimension " +
                    std::to_string(m.rows()) + ", expected " +
                    std::to_string(n));
      if (!all_finite(m)) throw Error("OperatorSet: " + what + " not finite");
    };
    for (std::size_t i = 0; i < diffusive_ops.size(); ++i)
      check_dim(diffusive_ops[i], "C[" + std::to_string(i) + "]");
    std::set<std::string> labels;
    for (const auto& op : jump_ops) {
      check_dim(op.matrix, "D '" + op.label + "'");
      if (!labels.insert(op.label).second)
        throw Error("OperatorSet: duplicate channel label '" + op.label + "'");
    }
    for (const auto& op : scaled_jump_ops) {
      check_dim(op.matrix, "A '" + op.label + "'");
      if (!labels.insert(op.label).second)
        throw Error("OperatorSet: duplicate channel label '" + op.label + "'");
    }
    if (!scaled_jump_ops.empty() && epsilon <= 0.0)
      throw Error("OperatorSet: epsilon must be positive when scaled jump "
                  "channels are present");
  }
};

/// Residual of the admissibility condition: ||sum_j (A_j - A_j^+)||_F.
/// A value below kConditionTol means the scaled family has a diffusive
/// limit.
inline double condition_residual(const std::vector<LabeledOp>& scaled) {
  if (scaled.empty()) throw Error("condition_residual: empty operator list");
  Mat acc = zero(static_cast<int>(scaled.front().matrix.rows()));
  for (const auto& op : scaled) {
    require_same_dim(acc, op.matrix, "condition_residual");
    acc += op.matrix - Mat(op.matrix.adjoint());
  }
  return fro_norm(acc);
}

inline double condition_residual(const OperatorSet& ops) {
  return condition_residual(ops.scaled_jump_ops);
}

// ---------------------------------------------------------------------------
// JSON serialization. Complex entries are [re, im] pairs; an N x N matrix is
// a row-major array of rows.

inline nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat matrix_from_json(const nlohmann::json& j, int dim,
                            const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw Error("JSON " + what + ": expected " + std::to_string(dim) +
                " rows");
  Mat m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw Error("JSON " + what + ": row " + std::to_string(r) +
                  " has wrong length");
    for (int c = 0; c < dim; ++c) {
      const auto& e = row[c];
      if (!e.is_array() || e.size() != 2)
        throw Error("JSON " + what + ": entries must be [re, im] pairs");
      m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

inline nlohmann::json to_json(const OperatorSet& ops) {
  nlohmann::json j;
  j["dim"] = ops.dim();
  j["H"] = matrix_to_json(ops.hamiltonian);
  j["C"] = nlohmann::json::array();
  for (const auto& c : ops.diffusive_ops) j["C"].push_back(matrix_to_json(c));
  j["D"] = nlohmann::json::array();
  for (const auto& d : ops.jump_ops)
    j["D"].push_back({{"label", d.label}, {"matrix", matrix_to_json(d.matrix)}});
  j["A_scaled"] = nlohmann::json::array();
  for (const auto& a : ops.scaled_jump_ops)
    j["A_scaled"].push_back(
        {{"label", a.label}, {"matrix", matrix_to_json(a.matrix)}});
  j["epsilon"] = ops.epsilon;
  return j;
}

inline OperatorSet operator_set_from_json(const nlohmann::json& j) {
  OperatorSet ops;
  if (!j.contains("dim") || !j["dim"].is_number_integer())
    throw Error("JSON operator set: missing integer key 'dim'");
  const int dim = j["dim"].get<int>();
  if (dim < 1 || dim > kMaxDim)
    throw Error("JSON operator set: dim out of range [1, " +
                std::to_string(kMaxDim) + "]");
  if (!j.contains("H")) throw Error("JSON operator set: missing key 'H'");
  ops.hamiltonian = matrix_from_json(j["H"], dim, "H");
  if (j.contains("C"))
    for (const auto& c : j["C"])
      ops.diffusive_ops.push_back(matrix_from_json(c, dim, "C"));
  auto read_labeled = [&](const char* key, std::vector<LabeledOp>& out) {
    if (!j.contains(key)) return;
    for (const auto& e : j[key]) {
      if (!e.contains("label") || !e.contains("matrix"))
        throw Error(std::string("JSON operator set: '") + key +
                    "' entries need 'label' and 'matrix'");
      out.push_back({e["label"].get<std::string>(),
                     matrix_from_json(e["matrix"], dim, key)});
    }
  };
  read_labeled("D", ops.jump_ops);
  read_labeled("A_scaled", ops.scaled_jump_ops);
  if (j.contains("epsilon")) ops.epsilon = j["epsilon"].get<double>();
  ops.validate();
  return ops;
}

}  // namespace qsme
