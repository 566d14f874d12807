#include "grapple/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "grapple/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace grapple {

namespace {
constexpr char kMagic[4] = {'G', 'R', 'P', 'L'};

void write_i32(std::ostream& out, int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i64(std::ostream& out, int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_blob(std::ostream& out, const std::string& s) {
  write_i64(out, static_cast<int64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_grid(std::ostream& out, const Matrix& m) {
  write_i32(out, m.rows);
  write_i32(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.a.data()),
            static_cast<std::streamsize>(m.a.size() * sizeof(double)));
}

int32_t read_i32(std::istream& in) {
  int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  check(static_cast<bool>(in), "checkpoint: truncated while reading int32");
  return v;
}
int64_t read_i64(std::istream& in) {
  int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  check(static_cast<bool>(in), "checkpoint: truncated while reading int64");
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  check(static_cast<bool>(in), "checkpoint: truncated while reading float64");
  return v;
}
std::string read_blob(std::istream& in) {
  int64_t len = read_i64(in);
  check(len >= 0 && len < (1LL << 32), "checkpoint: implausible blob length");
  std::string s(static_cast<size_t>(len), '\0');
  in.read(s.data(), len);
  check(static_cast<bool>(in), "checkpoint: truncated while reading blob");
  return s;
}
Matrix read_grid(std::istream& in) {
  int32_t rows = read_i32(in);
  int32_t cols = read_i32(in);
  check(rows >= 0 && cols >= 0 && static_cast<int64_t>(rows) * cols < (1LL << 31),
        "checkpoint: implausible grid shape");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.a.data()),
          static_cast<std::streamsize>(m.a.size() * sizeof(double)));
  check(static_cast<bool>(in), "checkpoint: truncated while reading grid data");
  return m;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.is_open(), "checkpoint: cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof kMagic);
  write_i32(out, kCheckpointVersion);
  write_blob(out, ckpt.config_text);

  write_i32(out, ckpt.params.count());
  for (int i = 0; i < ckpt.params.count(); ++i) {
    write_blob(out, ckpt.params.name(i));
    write_grid(out, ckpt.params.at(i));
  }

  write_i32(out, ckpt.has_adam ? 1 : 0);
  if (ckpt.has_adam) {
    write_f64(out, ckpt.adam.learning_rate);
    write_f64(out, ckpt.adam.beta1);
    write_f64(out, ckpt.adam.beta2);
    write_f64(out, ckpt.adam.epsilon);
    write_i64(out, ckpt.adam.step_count);
    write_i32(out, static_cast<int32_t>(ckpt.adam.first_moment.size()));
    for (const Matrix& m : ckpt.adam.first_moment) write_grid(out, m);
    write_i32(out, static_cast<int32_t>(ckpt.adam.second_moment.size()));
    for (const Matrix& m : ckpt.adam.second_moment) write_grid(out, m);
  }

  write_blob(out, ckpt.rng_state);
  out.flush();
  check(static_cast<bool>(out), "checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.is_open(), "checkpoint: cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, sizeof magic);
  check(static_cast<bool>(in) && std::equal(magic, magic + 4, kMagic),
        "checkpoint: '" + path + "' is not a checkpoint file (bad magic)");
  const int version = read_i32(in);
  check(version == kCheckpointVersion,
        "checkpoint: unsupported format version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config_text = read_blob(in);
  const int count = read_i32(in);
  check(count >= 0, "checkpoint: negative parameter count");
  for (int i = 0; i < count; ++i) {
    std::string name = read_blob(in);
    ckpt.params.add(name, read_grid(in));
  }

  ckpt.has_adam = read_i32(in) != 0;
  if (ckpt.has_adam) {
    ckpt.adam.learning_rate = read_f64(in);
    ckpt.adam.beta1 = read_f64(in);
    ckpt.adam.beta2 = read_f64(in);
    ckpt.adam.epsilon = read_f64(in);
    ckpt.adam.step_count = read_i64(in);
    const int m1 = read_i32(in);
    for (int i = 0; i < m1; ++i) ckpt.adam.first_moment.push_back(read_grid(in));
    const int m2 = read_i32(in);
    for (int i = 0; i < m2; ++i) ckpt.adam.second_moment.push_back(read_grid(in));
  }

  ckpt.rng_state = read_blob(in);
  return ckpt;
}

}  // namespace grapple
