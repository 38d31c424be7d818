#include "genbench/checkpoint.hpp"

#include <span>
#include <sstream>

#include "genbench/binary_io.hpp"
#include "genbench/error.hpp"

namespace genbench {

namespace {

constexpr int kCheckpointSchemaVersion = 1;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& dir, const ModelParams& params, int n_grid,
                      const TrainConfig& config, double train_mse) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorKind::Io, "checkpoint directory " + dir.string() + " does not exist");
  KeyValue kv;
  kv.set("schema_version", kCheckpointSchemaVersion);
  kv.set("kind", model_kind_name(params.kind));
  kv.set("n_grid", n_grid);
  kv.set("M", params.m);
  kv.set("hidden", params.shape.hidden);
  kv.set("stencil_q", params.shape.stencil_q);
  kv.set("output_bias", params.shape.output_bias);
  kv.set("seed", params.seed);
  kv.set("config_hash", config_hash(config));
  kv.set("train_mse", train_mse);
  std::string names;
  for (const auto& [name, t] : params.tensors) {
    names += (names.empty() ? "" : ",") + name;
    kv.set("tensor." + name + ".shape",
           std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    // Row-major on disk, like every other matrix file.
    const RowMatrix rm = t;
    write_f64(dir / (name + ".bin"), std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
  }
  kv.set("tensors", names);
  kv.set("layout", "row-major f64le");
  const KeyValue cfg = config_to_keyvalue(config);
  for (const auto& [k, v] : cfg.entries()) kv.set("config." + k, v);
  kv.write(dir / "manifest");
}

Checkpoint read_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorKind::Io, "checkpoint directory " + dir.string() + " does not exist");
  const KeyValue kv = KeyValue::read(dir / "manifest");
  if (kv.get_int("schema_version") != kCheckpointSchemaVersion)
    throw Error(ErrorKind::Io, "unsupported checkpoint schema version in " + dir.string());
  const auto kind = parse_model_kind(kv.get("kind"));
  if (!kind) throw Error(ErrorKind::Io, "unknown model kind '" + kv.get("kind") + "'");

  Checkpoint ck;
  ck.n_grid = static_cast<int>(kv.get_int("n_grid"));
  ck.train_mse = kv.get_double("train_mse");
  ModelParams& p = ck.params;
  p.kind = *kind;
  p.m = static_cast<int>(kv.get_int("M"));
  if (p.m != ck.n_grid - 1) throw Error(ErrorKind::Io, "checkpoint M does not match n_grid");
  p.shape.hidden = static_cast<int>(kv.get_int("hidden"));
  p.shape.stencil_q = static_cast<int>(kv.get_int("stencil_q"));
  p.shape.output_bias = kv.get("output_bias") == "true";
  p.seed = kv.get_uint("seed");
  for (const std::string& name : split_list(kv.get("tensors"))) {
    const std::string shape = kv.get("tensor." + name + ".shape");
    const auto x = shape.find('x');
    const auto rows = x == std::string::npos ? std::nullopt : parse_int(shape.substr(0, x));
    const auto cols = x == std::string::npos ? std::nullopt : parse_int(shape.substr(x + 1));
    if (!rows || !cols || *rows < 1 || *cols < 1)
      throw Error(ErrorKind::Io, "bad shape '" + shape + "' for tensor " + name);
    const auto values = read_f64(dir / (name + ".bin"), static_cast<std::size_t>(*rows * *cols));
    RowMatrix rm = Eigen::Map<const RowMatrix>(values.data(), *rows, *cols);
    p.tensors[name] = rm;
  }
  // Compare against a fresh model so a truncated or edited manifest is caught.
  const ModelParams ref = init_model(p.kind, p.m, 0, InitScheme::Zeros, p.shape);
  if (ref.tensors.size() != p.tensors.size())
    throw Error(ErrorKind::Io, "checkpoint tensor list does not match a " + model_kind_name(p.kind));
  for (const auto& [name, t] : ref.tensors) {
    auto it = p.tensors.find(name);
    if (it == p.tensors.end() || it->second.rows() != t.rows() || it->second.cols() != t.cols())
      throw Error(ErrorKind::Io, "checkpoint tensor " + name + " is missing or misshapen");
  }
  if (!p.all_finite()) throw Error(ErrorKind::Io, "checkpoint holds non-finite values");
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("config.", 0) == 0) ck.config.set(k.substr(7), v);
  }
  return ck;
}

}  // namespace genbench
