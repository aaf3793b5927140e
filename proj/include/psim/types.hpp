#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace psim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Agent type space W: finite label set, integer lattice Z^d, or the real line.
// RealLine carries a truncation bound only for binning and diagnostics; the
// dynamics never truncate agent positions.
class TypeSpace {
 public:
  enum class Kind { FiniteLabels, IntegerLattice, RealLine };

  static TypeSpace finite(std::vector<std::string> labels) {
    if (labels.empty()) throw ConfigError("TypeSpace: need at least one label");
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = i + 1; j < labels.size(); ++j)
        if (labels[i] == labels[j]) throw ConfigError("TypeSpace: duplicate label '" + labels[i] + "'");
    TypeSpace s;
    s.kind_ = Kind::FiniteLabels;
    s.labels_ = std::move(labels);
    return s;
  }

  static TypeSpace lattice(int dimension) {
    if (dimension < 1) throw ConfigError("TypeSpace: lattice dimension must be >= 1");
    TypeSpace s;
    s.kind_ = Kind::IntegerLattice;
    s.dim_ = dimension;
    return s;
  }

  static TypeSpace real_line(double truncation_bound) {
    if (!(truncation_bound > 0)) throw ConfigError("TypeSpace: truncation bound must be > 0");
    TypeSpace s;
    s.kind_ = Kind::RealLine;
    s.bound_ = truncation_bound;
    return s;
  }

  Kind kind() const { return kind_; }
  bool is_finite() const { return kind_ == Kind::FiniteLabels; }
  int size() const {
    if (kind_ != Kind::FiniteLabels) throw ConfigError("TypeSpace: size() requires finite labels");
    return static_cast<int>(labels_.size());
  }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int i) const { return labels_.at(static_cast<std::size_t>(i)); }
  int label_index(const std::string& name) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == name) return static_cast<int>(i);
    throw ConfigError("TypeSpace: unknown label '" + name + "'");
  }
  int dimension() const { return dim_; }
  double truncation_bound() const { return bound_; }

  bool operator==(const TypeSpace& o) const {
    return kind_ == o.kind_ && labels_ == o.labels_ && dim_ == o.dim_ && bound_ == o.bound_;
  }
  bool operator!=(const TypeSpace& o) const { return !(*this == o); }

 private:
  Kind kind_ = Kind::FiniteLabels;
  std::vector<std::string> labels_;
  int dim_ = 0;
  double bound_ = 0;
};

// A single agent type w in W: label index, lattice point, or real scalar.
class TypeValue {
 public:
  TypeValue() : value_(0) {}
  explicit TypeValue(int label) : value_(label) {}
  explicit TypeValue(Eigen::VectorXi point) : value_(std::move(point)) {}
  explicit TypeValue(double x) : value_(x) {}

  bool is_label() const { return std::holds_alternative<int>(value_); }
  bool is_lattice() const { return std::holds_alternative<Eigen::VectorXi>(value_); }
  bool is_real() const { return std::holds_alternative<double>(value_); }

  int label() const { return std::get<int>(value_); }
  const Eigen::VectorXi& lattice_point() const { return std::get<Eigen::VectorXi>(value_); }
  double real() const { return std::get<double>(value_); }

  bool member_of(const TypeSpace& space) const {
    switch (space.kind()) {
      case TypeSpace::Kind::FiniteLabels:
        return is_label() && label() >= 0 && label() < space.size();
      case TypeSpace::Kind::IntegerLattice:
        return is_lattice() && lattice_point().size() == space.dimension();
      case TypeSpace::Kind::RealLine:
        return is_real() && std::isfinite(real());
    }
    return false;
  }

  bool operator==(const TypeValue& o) const { return value_ == o.value_; }
  bool operator<(const TypeValue& o) const {
    if (value_.index() != o.value_.index()) return value_.index() < o.value_.index();
    if (is_label()) return label() < o.label();
    if (is_real()) return real() < o.real();
    const auto& a = lattice_point();
    const auto& b = o.lattice_point();
    if (a.size() != b.size()) return a.size() < b.size();
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (a[i] != b[i]) return a[i] < b[i];
    return false;
  }

 private:
  std::variant<int, Eigen::VectorXi, double> value_;
};

// Configuration eta of the N agents; every entry lies in `space`.
struct AgentConfiguration {
  TypeSpace space;
  std::vector<TypeValue> types;

  int n_agents() const { return static_cast<int>(types.size()); }

  void validate() const {
    if (types.empty()) throw ConfigError("AgentConfiguration: N must be >= 1");
    for (const auto& t : types)
      if (!t.member_of(space)) throw ConfigError("AgentConfiguration: type not a member of the space");
  }
};

}  // namespace psim
