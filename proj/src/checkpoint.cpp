#include "bas/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "bas/errors.hpp"

namespace bas {

namespace {

constexpr char kMagic[8] = {'B', 'A', 'S', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

void write_raw(std::ofstream &out, const void *p, std::size_t bytes) {
  out.write(static_cast<const char *>(p), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream &in, void *p, std::size_t bytes, const std::string &what) {
  in.read(static_cast<char *>(p), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw IoError("truncated checkpoint while reading " + what);
}

}  // namespace

void save_checkpoint(const std::filesystem::path &path, BASModel &model,
                     const CheckpointMeta &meta, bool include_momentum) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["spec"] = {{"widths", model.spec().widths},
                    {"split_point", model.spec().split_point},
                    {"num_categories", model.spec().num_categories}};
  header["input_size"] = meta.input_size;
  header["epoch"] = meta.epoch;
  header["step_in_epoch"] = meta.step_in_epoch;
  header["global_step"] = meta.global_step;
  header["seed"] = meta.seed;
  header["rng"] = {{"scheme", "counter"},
                   {"seed", meta.seed},
                   {"epoch", meta.epoch},
                   {"step", meta.step_in_epoch}};
  header["metrics"] = nlohmann::json::parse(meta.metrics_json, nullptr, false).is_discarded()
                          ? nlohmann::json::object()
                          : nlohmann::json::parse(meta.metrics_json);

  nlohmann::json tensors = nlohmann::json::array();
  auto params = model.params();
  for (const Param *p : params) {
    tensors.push_back({{"name", p->name},
                       {"kind", "value"},
                       {"shape", {p->value.n, p->value.c, p->value.h, p->value.w}}});
  }
  if (include_momentum) {
    for (const Param *p : params) {
      if (p->momentum.empty()) continue;
      tensors.push_back({{"name", p->name},
                         {"kind", "momentum"},
                         {"shape", {p->momentum.n, p->momentum.c, p->momentum.h, p->momentum.w}}});
    }
  }
  header["tensors"] = tensors;

  const std::string header_str = header.dump();
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());

  write_raw(out, kMagic, sizeof(kMagic));
  const std::uint32_t version = kFormatVersion;
  write_raw(out, &version, sizeof(version));
  const std::uint64_t header_len = header_str.size();
  write_raw(out, &header_len, sizeof(header_len));
  write_raw(out, header_str.data(), header_str.size());

  for (const Param *p : params)
    write_raw(out, p->value.data.data(), p->value.size() * sizeof(double));
  if (include_momentum) {
    for (const Param *p : params) {
      if (p->momentum.empty()) continue;
      write_raw(out, p->momentum.data.data(), p->momentum.size() * sizeof(double));
    }
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());

  char magic[8];
  read_raw(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  std::uint32_t version = 0;
  read_raw(in, &version, sizeof(version), "version");
  if (version != kFormatVersion)
    throw IoError("unsupported checkpoint format version " + std::to_string(version));
  std::uint64_t header_len = 0;
  read_raw(in, &header_len, sizeof(header_len), "header length");
  std::string header_str(header_len, '\0');
  read_raw(in, header_str.data(), header_len, "header");

  nlohmann::json header = nlohmann::json::parse(header_str);
  BackboneSpec spec;
  spec.widths = header.at("spec").at("widths").get<std::vector<int>>();
  spec.split_point = header.at("spec").at("split_point").get<std::string>();
  spec.num_categories = header.at("spec").at("num_categories").get<int>();

  LoadedCheckpoint out;
  out.meta.input_size = header.value("input_size", 0);
  out.meta.epoch = header.value("epoch", 0);
  out.meta.step_in_epoch = header.value("step_in_epoch", 0);
  out.meta.global_step = header.value("global_step", 0LL);
  out.meta.seed = header.value("seed", 0ULL);
  out.meta.metrics_json = header.value("metrics", nlohmann::json::object()).dump();

  out.model = std::make_unique<BASModel>(spec, /*seed=*/0);

  for (const auto &t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const std::string kind = t.at("kind").get<std::string>();
    const auto shape = t.at("shape").get<std::vector<int>>();
    if (shape.size() != 4) throw IoError("bad tensor shape in checkpoint header");
    Param *p = out.model->find_param(name);
    if (!p) throw IoError("checkpoint tensor '" + name + "' has no matching parameter");
    Tensor buf(shape[0], shape[1], shape[2], shape[3]);
    read_raw(in, buf.data.data(), buf.size() * sizeof(double), name);
    if (kind == "value") {
      if (!buf.same_shape(p->value))
        throw IoError("checkpoint tensor '" + name + "' shape mismatch");
      p->value = std::move(buf);
    } else if (kind == "momentum") {
      p->momentum = std::move(buf);
      out.has_momentum = true;
    } else {
      throw IoError("unknown tensor kind '" + kind + "' in checkpoint");
    }
  }
  return out;
}

}  // namespace bas
