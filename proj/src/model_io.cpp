#include <cstring>
#include <sstream>

#include "nag/binary_io.hpp"
#include "nag/errors.hpp"
#include "nag/model.hpp"

namespace nag {
namespace {

constexpr char model_magic[4] = {'N', 'A', 'G', 'M'};
constexpr std::uint32_t model_version = 1;

// Config block, in order: K, d_prime, d_model, layers, heads, classes (u32
// each), readout, use_structural, head_hidden (u8 each), one reserved u8.
void write_config(io::ByteWriter& w, const ModelConfig& c) {
  w.u32(c.K);
  w.u32(c.d_prime);
  w.u32(c.d_model);
  w.u32(c.layers);
  w.u32(c.heads);
  w.u32(c.classes);
  w.u8(static_cast<std::uint8_t>(c.readout));
  w.u8(c.use_structural ? 1 : 0);
  w.u8(c.head_hidden ? 1 : 0);
  w.u8(0);
}

ModelConfig read_config(io::StreamReader& r) {
  ModelConfig c;
  c.K = r.u32();
  c.d_prime = r.u32();
  c.d_model = r.u32();
  c.layers = r.u32();
  c.heads = r.u32();
  c.classes = r.u32();
  const std::uint8_t readout = r.u8();
  if (readout > static_cast<std::uint8_t>(Readout::single))
    throw LoadError(LoadFailure::manifest_mismatch, "model file has an unknown readout id");
  c.readout = static_cast<Readout>(readout);
  c.use_structural = r.u8() != 0;
  c.head_hidden = r.u8() != 0;
  r.u8();
  return c;
}

}  // namespace

void save_model(const ModelParams& params, const ModelConfig& config, const std::string& path) {
  io::ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(model_magic), 4});
  w.u32(model_version);
  write_config(w, config);

  const auto leaves = params.leaves();
  w.u32(static_cast<std::uint32_t>(leaves.size()));
  std::uint64_t offset = 0;
  for (const ParamLeaf* leaf : leaves) {
    w.u16(static_cast<std::uint16_t>(leaf->name.size()));
    w.text(leaf->name);
    w.u64(leaf->value.rows());
    w.u64(leaf->value.cols());
    w.u64(offset);
    offset += leaf->value.size();
  }
  w.u64(offset);

  auto out = io::open_for_write(path);
  out.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.buffer().size()));
  for (const ParamLeaf* leaf : leaves) io::write_f64_array(out, leaf->value.flat());
  out.flush();
  if (!out) throw DataError("failed writing model file: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadFailure::not_found, "model file not found: " + path);
  io::StreamReader r(in, "model file");

  std::uint8_t magic[4];
  try {
    r.bytes(magic);
  } catch (const LoadError&) {
    throw LoadError(LoadFailure::bad_magic, "not a model file: " + path);
  }
  if (std::memcmp(magic, model_magic, 4) != 0) throw LoadError(LoadFailure::bad_magic, "not a model file: " + path);
  const std::uint32_t version = r.u32();
  if (version != model_version) {
    std::ostringstream os;
    os << "model file version " << version << " unsupported (expected " << model_version << ")";
    throw LoadError(LoadFailure::version_mismatch, os.str());
  }

  LoadedModel m;
  try {
    m.config = read_config(r);
    m.config.validate();
  } catch (const ConfigError& e) {
    throw LoadError(LoadFailure::manifest_mismatch, std::string("model file config invalid: ") + e.what());
  }
  m.params = init_params(m.config, 0);
  auto leaves = m.params.leaves();

  const std::uint32_t count = r.u32();
  if (count != leaves.size()) {
    std::ostringstream os;
    os << "model manifest lists " << count << " leaves, config implies " << leaves.size();
    throw LoadError(LoadFailure::manifest_mismatch, os.str());
  }
  std::uint64_t expected_offset = 0;
  for (ParamLeaf* leaf : leaves) {
    const std::string name = r.text(r.u16());
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    const std::uint64_t offset = r.u64();
    if (name != leaf->name || rows != leaf->value.rows() || cols != leaf->value.cols() ||
        offset != expected_offset) {
      std::ostringstream os;
      os << "model manifest entry '" << name << "' " << rows << "x" << cols << " does not match expected '"
         << leaf->name << "' " << leaf->value.rows() << "x" << leaf->value.cols();
      throw LoadError(LoadFailure::manifest_mismatch, os.str());
    }
    expected_offset += rows * cols;
  }
  if (r.u64() != expected_offset) throw LoadError(LoadFailure::manifest_mismatch, "model payload size mismatch");

  try {
    for (ParamLeaf* leaf : leaves) r.f64_array(leaf->value.flat());
  } catch (const LoadError& e) {
    if (e.failure() == LoadFailure::truncated) throw LoadError(LoadFailure::truncated, "truncated model file");
    throw;
  }
  r.expect_end();
  return m;
}

}  // namespace nag
