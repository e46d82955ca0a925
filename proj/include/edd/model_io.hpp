#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "edd/mlp.hpp"

namespace edd {

/// A serialisable network plus the tag of the distribution head it feeds
/// and any scalar head attributes (variance floor, class count, ...).
struct ModelRecord {
  Mlp network{MlpSpec{}};
  std::string head_tag;
  std::map<std::string, scalar_t> attributes;

  friend bool operator==(const ModelRecord&, const ModelRecord&) = default;
};

/// Text format, version 1:
///
///   edd-model 1
///   head <tag>
///   attr <name> <value>          (zero or more)
///   activation <tanh|relu>
///   widths <input> <hidden...> <output>
///   seed <u64>
///   param <name> <rows> <cols>   (then one line per row)
///   end
///
/// Reals are written with 17 significant digits so reading back is exact.
void write_model(std::ostream& os, const ModelRecord& model);
ModelRecord read_model(std::istream& is);

void save_model(const std::filesystem::path& path, const ModelRecord& model);
ModelRecord load_model(const std::filesystem::path& path);

}  // namespace edd
