#include "vv/tensor/checkpoint.hpp"

#include <fstream>

#include "vv/common/binary_io.hpp"
#include "vv/common/fs.hpp"

namespace vv {

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    for (const auto& e : entries) {
      binio::put_u64(out, e.name.size());
      out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      binio::put_u64(out, e.value.rank());
      for (const auto d : e.value.shape()) binio::put_u64(out, static_cast<std::uint64_t>(d));
      for (const auto v : e.value.data()) binio::put_f64(out, v);
    }
  });
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  binio::expect_magic(in, std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic) - 1));
  std::vector<NamedTensor> entries;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto name_len = binio::get_u64(in);
    if (name_len > (1u << 16)) throw binio::FormatError("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw binio::FormatError("checkpoint: truncated name");
    }
    const auto rank = binio::get_u64(in);
    if (rank > 16) throw binio::FormatError("checkpoint: implausible rank for '" + name + "'");
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<std::int64_t>(binio::get_u64(in)));
    }
    Tensor t(shape);
    for (auto& v : t.data()) v = binio::get_f64(in);
    entries.push_back(NamedTensor{std::move(name), std::move(t)});
  }
  return entries;
}

}  // namespace vv
