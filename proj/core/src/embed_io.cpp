#include "grapple/embed_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "grapple/error.hpp"
#include "grapple/textio.hpp"

namespace grapple {

namespace {
double parse_double(const std::string& token, const std::string& path, int line) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  check(ec == std::errc() && ptr == end,
        path + ":" + std::to_string(line) + ": bad numeric value '" + token + "'");
  return v;
}

int parse_int(const std::string& token, const std::string& path, int line) {
  int v = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  check(ec == std::errc() && ptr == end,
        path + ":" + std::to_string(line) + ": bad integer '" + token + "'");
  return v;
}
}  // namespace

void write_embedding_table(const std::string& path, const EmbeddingTable& table) {
  check(static_cast<int>(table.labels.size()) == table.rows.rows,
        "embedding table: label count != row count");
  std::ofstream out(path, std::ios::trunc);
  check(out.is_open(), "embedding table: cannot open '" + path + "' for writing");
  out << "dim=" << table.rows.cols << " count=" << table.rows.rows
      << " classes=" << table.num_classes << "\n";
  for (int i = 0; i < table.rows.rows; ++i) {
    out << table.labels[i];
    for (int j = 0; j < table.rows.cols; ++j) out << ',' << fmt17(table.rows.at(i, j));
    out << '\n';
  }
  out.flush();
  check(static_cast<bool>(out), "embedding table: write to '" + path + "' failed");
}

EmbeddingTable read_embedding_table(const std::string& path) {
  std::ifstream in(path);
  check(in.is_open(), "embedding table: cannot open '" + path + "'");
  std::string header;
  check(static_cast<bool>(std::getline(in, header)),
        "embedding table: '" + path + "' is empty");
  int dim = -1, count = -1, classes = -1;
  {
    std::istringstream hs(header);
    std::string kv;
    while (hs >> kv) {
      const auto eq = kv.find('=');
      check(eq != std::string::npos, path + ":1: bad header token '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const int value = parse_int(kv.substr(eq + 1), path, 1);
      if (key == "dim") dim = value;
      else if (key == "count") count = value;
      else if (key == "classes") classes = value;
      else fail(path + ":1: unknown header key '" + key + "'");
    }
  }
  check(dim >= 1, path + ":1: header must set dim >= 1");
  check(count >= 0, path + ":1: header must set count >= 0");
  check(classes >= 1, path + ":1: header must set classes >= 1");

  EmbeddingTable table;
  table.rows = Matrix(count, dim);
  table.num_classes = classes;
  std::string line;
  int lineno = 1;
  int row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    check(row < count, path + ":" + std::to_string(lineno) +
                           ": more rows than the header's count");
    std::istringstream ls(line);
    std::string token;
    check(static_cast<bool>(std::getline(ls, token, ',')),
          path + ":" + std::to_string(lineno) + ": empty row");
    const int label = parse_int(token, path, lineno);
    check(label >= 0 && label < classes,
          path + ":" + std::to_string(lineno) + ": label " + std::to_string(label) +
              " outside [0," + std::to_string(classes) + ")");
    table.labels.push_back(label);
    int col = 0;
    while (std::getline(ls, token, ',')) {
      check(col < dim, path + ":" + std::to_string(lineno) + ": more than dim values");
      table.rows.at(row, col++) = parse_double(token, path, lineno);
    }
    check(col == dim, path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(dim) + " values, got " + std::to_string(col));
    ++row;
  }
  check(row == count, path + ": expected " + std::to_string(count) + " rows, got " +
                          std::to_string(row));
  return table;
}

}  // namespace grapple
