#include "mvstream/lifecycle.hpp"

namespace mvstream {

void LifecycleConfig::validate() const {
  if (B == 0) throw config_error("B must be positive");
  if (k < 2) throw config_error("k must be at least 2");
  if (A != k * B) throw config_error("A must equal k*B");
}

ShardCounts shard_count(std::uint64_t n_docs, std::uint64_t A,
                        std::uint64_t B) {
  if (A == 0 || B == 0 || A % B != 0 || A / B < 2)
    throw config_error("invalid shard sizes");
  ShardCounts c;
  c.n_large = n_docs / A;
  const std::uint64_t r = n_docs % A;
  c.n_small = r / B;
  c.n_incomplete = (r % B != 0) ? 1 : 0;
  c.total = c.n_large + c.n_small + c.n_incomplete;
  return c;
}

std::string to_string(const LifecycleEvent& ev) {
  return std::visit(
      [](const auto& e) -> std::string {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, EventBootstrapExact>) {
          return "ordinal=" + std::to_string(e.ordinal) +
                 " bootstrap-exact doc=" + e.doc_id;
        } else if constexpr (std::is_same_v<T, EventIndexedIntoIncomplete>) {
          return "ordinal=" + std::to_string(e.ordinal) +
                 " incomplete doc=" + e.doc_id + " model=" + e.model_used;
        } else if constexpr (std::is_same_v<T, EventSmallShardSealed>) {
          return "ordinal=" + std::to_string(e.ordinal) +
                 " sealed-small shard=" + e.shard_id + " model=" + e.model_id;
        } else {
          std::string s = "ordinal=" + std::to_string(e.ordinal) +
                          " sealed-large shard=" + e.shard_id +
                          " model=" + e.model_id + " retired=[";
          for (std::size_t i = 0; i < e.retired.size(); ++i) {
            if (i) s += ',';
            s += e.retired[i];
          }
          s += ']';
          return s;
        }
      },
      ev);
}

}  // namespace mvstream
