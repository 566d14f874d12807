#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "grapple/matrix.hpp"
#include "grapple/rng.hpp"

namespace grapple {

// Ordered collection of named parameter grids. Creation order is the
// canonical order everywhere (optimizer sweeps, checkpoints, pruning pool,
// flat views), which keeps runs bitwise reproducible.
class ParamStore {
 public:
  int add(const std::string& name, Matrix init);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  int index_of(const std::string& name) const;

  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  Matrix& at(int i) { return values_[i]; }
  const Matrix& at(int i) const { return values_[i]; }

  const std::string& name(int i) const { return names_[i]; }
  int count() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  // Total scalar count across all grids.
  long long scalar_count() const;

  // Flat-coordinate addressing across grids in creation order, used by the
  // gradient checker and the pruning pool.
  struct Coord {
    int param;
    int offset;
  };
  Coord locate(long long flat) const;
  double get_flat(long long flat) const;
  void set_flat(long long flat, double v);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::unordered_map<std::string, int> index_;
};

// He-style scaled normal init for a fan_in x fan_out grid.
Matrix init_weight(int fan_in, int fan_out, RngStream& rng);

}  // namespace grapple
