#include "grapple/params.hpp"

#include <cmath>

#include "grapple/error.hpp"

namespace grapple {

int ParamStore::add(const std::string& name, Matrix init) {
  check(!has(name), "ParamStore: duplicate parameter name '" + name + "'");
  check(!init.empty(), "ParamStore: empty grid for '" + name + "'");
  names_.push_back(name);
  values_.push_back(std::move(init));
  index_[name] = count() - 1;
  return count() - 1;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  check(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

Matrix& ParamStore::at(const std::string& name) { return values_[index_of(name)]; }

const Matrix& ParamStore::at(const std::string& name) const {
  return values_[index_of(name)];
}

long long ParamStore::scalar_count() const {
  long long n = 0;
  for (const Matrix& m : values_) n += m.size();
  return n;
}

ParamStore::Coord ParamStore::locate(long long flat) const {
  check(flat >= 0 && flat < scalar_count(),
        "ParamStore: flat index " + std::to_string(flat) + " out of range");
  for (int p = 0; p < count(); ++p) {
    if (flat < values_[p].size()) return {p, static_cast<int>(flat)};
    flat -= values_[p].size();
  }
  fail("ParamStore::locate: unreachable");
}

double ParamStore::get_flat(long long flat) const {
  Coord c = locate(flat);
  return values_[c.param].a[c.offset];
}

void ParamStore::set_flat(long long flat, double v) {
  Coord c = locate(flat);
  values_[c.param].a[c.offset] = v;
}

Matrix init_weight(int fan_in, int fan_out, RngStream& rng) {
  check(fan_in > 0 && fan_out > 0, "init_weight: nonpositive dimension");
  Matrix w(fan_in, fan_out);
  double s = std::sqrt(2.0 / fan_in);
  for (int i = 0; i < w.size(); ++i) w.a[i] = s * rng.normal();
  return w;
}

}  // namespace grapple
