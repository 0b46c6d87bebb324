// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mdlm/error.hpp"
#include "mdlm/hash.hpp"

namespace mdlm::inline MDLM_ABI {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

constexpr char kMagic[8] = {'M', 'D', 'L', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint", "truncated checkpoint");
  return v;
}

template <typename Stored>
Matrix read_tensor(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  std::vector<Stored> buf(static_cast<std::size_t>(rows * cols));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(Stored)));
  if (!in) throw Error("checkpoint", "truncated tensor data");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = static_cast<Real>(buf[i]);
  return m;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const std::vector<const ag::Parameter*>& params) {
  header["dtype"] = kRealName;
  header["tensors"] = nlohmann::json::array();
  for (const auto* p : params)
    header["tensors"].push_back({{"name", p->name()}, {"rows", p->value().rows()}, {"cols", p->value().cols()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* p : params)
    out.write(reinterpret_cast<const char*>(p->value().data()),
              static_cast<std::streamsize>(p->value().size() * sizeof(Real)));
  if (!out) throw Error("io", "failed writing " + path.string());
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error("checkpoint", "not an mdlm checkpoint");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw Error("checkpoint", "unsupported checkpoint version " + std::to_string(version));
  const auto length = read_pod<std::uint64_t>(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw Error("checkpoint", "truncated header");

  CheckpointFile file;
  try {
    file.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw Error("checkpoint", "corrupt checkpoint header");
  }
  const std::string dtype = file.header.value("dtype", "");
  if (dtype != "f32" && dtype != "f64") throw Error("checkpoint", "unknown dtype '" + dtype + "'");
  for (const auto& t : file.header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    file.tensors[t.at("name").get<std::string>()] =
        dtype == "f32" ? read_tensor<float>(in, rows, cols) : read_tensor<double>(in, rows, cols);
  }
  return file;
}

void assign_parameters(const CheckpointFile& file, const std::vector<ag::Parameter*>& params) {
  for (auto* p : params) {
    auto it = file.tensors.find(p->name());
    if (it == file.tensors.end()) throw Error("checkpoint", "missing tensor " + p->name());
    if (it->second.rows() != p->value().rows() || it->second.cols() != p->value().cols())
      throw Error("checkpoint", "shape mismatch for tensor " + p->name());
    p->value() = it->second;
  }
}

void save_model(const std::filesystem::path& path, const Denoiser& model, const Vocabulary& vocab,
                const ScheduleConfig& schedule, const nlohmann::json& extra) {
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  header["kind"] = "denoiser";
  header["model"] = model.config().to_json();
  header["schedule"] = schedule.to_json();
  header["vocab"] = vocab.to_json();
  header["vocab_hash"] = hex_digest(vocab.hash());
  write_checkpoint(path, std::move(header), model.parameters());
}

ModelBundle load_model(const std::filesystem::path& path) {
  CheckpointFile file = read_checkpoint(path);
  if (file.header.value("kind", "") != "denoiser") throw Error("checkpoint", path.string() + " is not a denoiser");
  Vocabulary vocab = Vocabulary::from_json(file.header.at("vocab"));
  if (file.header.value("vocab_hash", "") != hex_digest(vocab.hash()))
    throw Error("checkpoint", "vocabulary hash mismatch");
  ModelBundle bundle{std::move(vocab), ScheduleConfig::from_json(file.header.at("schedule")),
                     Denoiser(DenoiserConfig::from_json(file.header.at("model")), 0), file.header};
  assign_parameters(file, bundle.model.parameters());
  return bundle;
}

}  // namespace mdlm
