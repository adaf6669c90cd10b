// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/checkpoint.hpp"

#include <fstream>

#include "xmodal/errors.hpp"
#include "xmodal/tensor_io.hpp"

namespace xmodal {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  put_u16(out, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint16_t get_u16(const std::string& in, std::size_t& off) {
  if (off + 2 > in.size()) throw DataError("checkpoint: truncated");
  const unsigned char* p = reinterpret_cast<const unsigned char*>(in.data() + off);
  off += 2;
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::string& in, std::size_t& off) {
  const std::uint32_t lo = get_u16(in, off);
  const std::uint32_t hi = get_u16(in, off);
  return lo | (hi << 16);
}

std::uint64_t get_u64(const std::string& in, std::size_t& off) {
  const std::uint64_t lo = get_u32(in, off);
  const std::uint64_t hi = get_u32(in, off);
  return lo | (hi << 32);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta) {
  std::string out;
  out += "MMGC";
  out.push_back(1);
  put_u64(out, meta.config_hash);
  put_u32(out, static_cast<std::uint32_t>(model.num_classes));

  const EncoderConfig& ec = model.cfg.encoder;
  put_u32(out, static_cast<std::uint32_t>(ec.depth));
  put_u32(out, static_cast<std::uint32_t>(ec.heads));
  put_u32(out, static_cast<std::uint32_t>(ec.dim));
  for (Modality m : kAllModalities) {
    put_u32(out, static_cast<std::uint32_t>(ec.shape(m).input_width));
    put_u32(out, static_cast<std::uint32_t>(ec.shape(m).token_count));
  }
  const FusionConfig& fc = model.cfg.fusion;
  put_u32(out, static_cast<std::uint32_t>(fc.depth));
  put_u32(out, static_cast<std::uint32_t>(fc.heads));
  put_u32(out, static_cast<std::uint32_t>(fc.dim));
  put_u32(out, fc.pooling == Pooling::kMean ? 0u : 1u);
  put_u32(out, fc.kind == FusionKind::kAttention ? 0u : 1u);

  put_u32(out, static_cast<std::uint32_t>(meta.config_json.size()));
  out += meta.config_json;

  put_u32(out, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& [name, tensor] : model.params) {
    if (name.size() > 0xffff) throw DataError("checkpoint: parameter name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out += encode_tensor(tensor, kDtypeF64);
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  std::string in((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t off = 0;
  if (in.size() < 5 || in.compare(0, 4, "MMGC") != 0) throw DataError("checkpoint: bad magic");
  off = 4;
  const int version = static_cast<unsigned char>(in[off++]);
  if (version != 1) throw DataError("checkpoint: unsupported version");

  CheckpointMeta local;
  local.config_hash = get_u64(in, off);

  Model model;
  model.num_classes = static_cast<int>(get_u32(in, off));
  EncoderConfig& ec = model.cfg.encoder;
  ec.depth = static_cast<int>(get_u32(in, off));
  ec.heads = static_cast<int>(get_u32(in, off));
  ec.dim = static_cast<int>(get_u32(in, off));
  for (Modality m : kAllModalities) {
    ec.shape(m).input_width = static_cast<int>(get_u32(in, off));
    ec.shape(m).token_count = static_cast<int>(get_u32(in, off));
  }
  FusionConfig& fc = model.cfg.fusion;
  fc.depth = static_cast<int>(get_u32(in, off));
  fc.heads = static_cast<int>(get_u32(in, off));
  fc.dim = static_cast<int>(get_u32(in, off));
  fc.pooling = get_u32(in, off) == 0 ? Pooling::kMean : Pooling::kCls;
  fc.kind = get_u32(in, off) == 0 ? FusionKind::kAttention : FusionKind::kMlp;

  const std::uint32_t json_len = get_u32(in, off);
  if (off + json_len > in.size()) throw DataError("checkpoint: truncated");
  local.config_json = in.substr(off, json_len);
  off += json_len;

  const std::uint32_t count = get_u32(in, off);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = get_u16(in, off);
    if (off + name_len > in.size()) throw DataError("checkpoint: truncated");
    const std::string name = in.substr(off, name_len);
    off += name_len;
    model.params[name] = decode_tensor(in, &off);
  }
  if (off != in.size()) throw DataError("checkpoint: trailing bytes");

  model.cfg.validate();
  if (meta) *meta = local;
  return model;
}

}  // namespace xmodal
