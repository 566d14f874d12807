#pragma once

#include <string>

#include "grapple/metrics.hpp"

namespace grapple {

// Text format: one header line "dim=<d> count=<M> classes=<k>", then one
// line per graph: "<label>,<v1>,...,<vd>" with 17-significant-digit values
// so write -> read -> write is byte-stable.
void write_embedding_table(const std::string& path, const EmbeddingTable& table);
EmbeddingTable read_embedding_table(const std::string& path);

}  // namespace grapple
