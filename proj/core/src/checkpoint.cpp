#include "avsd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace avsd {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes native byte order and assumes a little-endian host");

namespace {

template <class T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw CheckpointError("truncated checkpoint: " + path.string());
  }
  return value;
}

void put_blocks(std::ostream& os, const ToyLMParams& p) {
  for (auto b : p.blocks()) os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size_bytes()));
}

void get_blocks(std::istream& is, ToyLMParams& p, const std::filesystem::path& path) {
  for (auto b : p.blocks()) {
    if (!is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size_bytes()))) {
      throw CheckpointError("truncated checkpoint: " + path.string());
    }
  }
}

std::pair<std::uint64_t, std::uint64_t> block_shape(const ToyLMParams& p, std::size_t i) {
  switch (i) {
    case 0: return {p.embed.rows(), p.embed.cols()};
    case 1: return {p.w_window.rows(), p.w_window.cols()};
    case 2: return {p.b_window.size(), 1};
    case 3: return {p.w_summary.rows(), p.w_summary.cols()};
    case 4: return {p.w_out.rows(), p.w_out.cols()};
    default: return {p.b_out.size(), 1};
  }
}

}  // namespace

std::filesystem::path meta_path(const std::filesystem::path& path) {
  auto out = path;
  out += ".meta";
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  // Write to a temporary and rename so an interrupted save never leaves a
  // half-written checkpoint under the final name.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open for writing: " + tmp.string());
    os.write(kCheckpointMagic, 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, ckpt.optimizer ? 1u : 0u);
    put<std::uint64_t>(os, ckpt.step);
    const auto& c = ckpt.params.config;
    put<std::uint64_t>(os, c.vocab);
    put<std::uint64_t>(os, c.embed_dim);
    put<std::uint64_t>(os, c.hidden);
    put<std::uint64_t>(os, c.window);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(kParamBlockCount));
    for (std::size_t i = 0; i < kParamBlockCount; ++i) {
      const auto [rows, cols] = block_shape(ckpt.params, i);
      put<std::uint64_t>(os, rows);
      put<std::uint64_t>(os, cols);
    }
    put_blocks(os, ckpt.params);
    if (ckpt.optimizer) {
      put<std::int64_t>(os, ckpt.optimizer->t);
      put_blocks(os, ckpt.optimizer->m);
      put_blocks(os, ckpt.optimizer->v);
    }
    if (!os) throw CheckpointError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);

  std::ofstream meta(meta_path(path), std::ios::trunc);
  if (!meta) throw CheckpointError("cannot open for writing: " + meta_path(path).string());
  meta << "format_version=" << kCheckpointVersion << "\n";
  meta << "step=" << ckpt.step << "\n";
  for (const auto& [k, v] : ckpt.meta) meta << k << "=" << v << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint not found: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not an AVSD checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto flags = get<std::uint32_t>(is, path);
  Checkpoint ckpt{ToyLMParams{}, std::nullopt, get<std::uint64_t>(is, path), {}};
  ToyLMConfig cfg;
  cfg.vocab = get<std::uint64_t>(is, path);
  cfg.embed_dim = get<std::uint64_t>(is, path);
  cfg.hidden = get<std::uint64_t>(is, path);
  cfg.window = get<std::uint64_t>(is, path);
  try {
    ckpt.params = ToyLMParams::zeros(cfg);
  } catch (const RejectedInput& e) {
    throw CheckpointError(std::string("corrupt checkpoint shape table: ") + e.what());
  }
  if (get<std::uint32_t>(is, path) != kParamBlockCount) throw CheckpointError("unexpected block count");
  for (std::size_t i = 0; i < kParamBlockCount; ++i) {
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    if (std::make_pair(rows, cols) != block_shape(ckpt.params, i)) {
      throw CheckpointError(std::string("shape mismatch in block ") + block_name(i));
    }
  }
  get_blocks(is, ckpt.params, path);
  if (flags & 1u) {
    AdamState st = AdamState::zeros(cfg);
    st.t = get<std::int64_t>(is, path);
    get_blocks(is, st.m, path);
    get_blocks(is, st.v, path);
    ckpt.optimizer = std::move(st);
  }

  std::ifstream meta(meta_path(path));
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    ckpt.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ckpt.meta.erase("format_version");
  ckpt.meta.erase("step");
  return ckpt;
}

}  // namespace avsd
