#pragma once

#include "mug/hetgraph/graph.hpp"
#include "mug/numerics/mat.hpp"
#include "mug/structenc/sgns.hpp"

namespace mug {

// Target-node input: [row-normalized attributes | row-normalized struct
// embedding]. Either block may be absent (no attributes, or table == nullptr).
inline Mat unify_attrs(const HetGraph& g, const StructTable* table) {
  const std::size_t n = g.num_targets();
  Mat attr = g.attrs[g.target_type] ? kernels::row_normalized(*g.attrs[g.target_type]) : Mat(n, 0);
  if (!table) return attr;
  if (!table->frozen()) throw ContractError("unify_attrs: struct table must be frozen");
  if (table->size() != g.total_nodes()) throw DimensionError("unify_attrs: struct table has " + std::to_string(table->size()) + " rows for " + std::to_string(g.total_nodes()) + " nodes");
  Mat z(n, table->dim());
  const std::size_t off = g.type_offset(g.target_type);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(table->embeddings().row_ptr(off + i), table->dim(), z.row_ptr(i));
  return kernels::hconcat(attr, kernels::row_normalized(z));
}

}  // namespace mug
