#include "pcm/wire.hpp"

#include <cstring>

namespace pcm {
namespace wire {

std::vector<uint8_t> encode_frame(const WireMessage& msg) {
  std::vector<uint8_t> out;
  out.reserve(9 + msg.body.size());
  out.push_back(kMagic[0]);
  out.push_back(kMagic[1]);
  out.push_back(kMagic[2]);
  out.push_back(kVersion);
  out.push_back(static_cast<uint8_t>(msg.type));
  uint32_t len = static_cast<uint32_t>(msg.body.size());
  out.push_back(static_cast<uint8_t>(len >> 24));
  out.push_back(static_cast<uint8_t>(len >> 16));
  out.push_back(static_cast<uint8_t>(len >> 8));
  out.push_back(static_cast<uint8_t>(len));
  out.insert(out.end(), msg.body.begin(), msg.body.end());
  return out;
}

WireMessage decode_frame(std::span<const uint8_t> bytes) {
  if (bytes.size() < 9) raise(ErrorCode::MalformedFrame, "frame shorter than header");
  if (std::memcmp(bytes.data(), kMagic, 3) != 0) {
    raise(ErrorCode::MalformedFrame, "bad magic");
  }
  if (bytes[3] != kVersion) raise(ErrorCode::UnsupportedVersion, "protocol version");
  uint8_t type = bytes[4];
  if (type < 1 || type > 5) raise(ErrorCode::MalformedFrame, "unknown message type");
  uint32_t len = static_cast<uint32_t>(bytes[5]) << 24 | static_cast<uint32_t>(bytes[6]) << 16 |
                 static_cast<uint32_t>(bytes[7]) << 8 | static_cast<uint32_t>(bytes[8]);
  if (bytes.size() != 9u + len) raise(ErrorCode::MalformedFrame, "length prefix mismatch");
  WireMessage msg;
  msg.type = static_cast<MsgType>(type);
  msg.body.assign(bytes.begin() + 9, bytes.end());
  return msg;
}

void Writer::u8(uint8_t v) { out_.push_back(v); }

void Writer::u16(uint16_t v) {
  out_.push_back(static_cast<uint8_t>(v >> 8));
  out_.push_back(static_cast<uint8_t>(v));
}

void Writer::u32(uint32_t v) {
  u16(static_cast<uint16_t>(v >> 16));
  u16(static_cast<uint16_t>(v));
}

void Writer::u64(uint64_t v) {
  u32(static_cast<uint32_t>(v >> 32));
  u32(static_cast<uint32_t>(v));
}

void Writer::bytes(std::span<const uint8_t> v) { out_.insert(out_.end(), v.begin(), v.end()); }

void Writer::blob(std::span<const uint8_t> v) {
  u32(static_cast<uint32_t>(v.size()));
  bytes(v);
}

void Writer::str(const std::string& v) {
  blob(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(v.data()), v.size()));
}

void Reader::need(size_t n) const {
  if (pos_ + n > data_.size()) raise(ErrorCode::MalformedFrame, "truncated body");
}

uint8_t Reader::u8() {
  need(1);
  return data_[pos_++];
}

uint16_t Reader::u16() {
  need(2);
  uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
  pos_ += 2;
  return v;
}

uint32_t Reader::u32() {
  uint32_t hi = u16();
  return hi << 16 | u16();
}

uint64_t Reader::u64() {
  uint64_t hi = u32();
  return hi << 32 | u32();
}

std::vector<uint8_t> Reader::bytes(size_t n) {
  need(n);
  std::vector<uint8_t> v(data_.begin() + pos_, data_.begin() + pos_ + n);
  pos_ += n;
  return v;
}

std::vector<uint8_t> Reader::blob() {
  uint32_t n = u32();
  return bytes(n);
}

std::string Reader::str() {
  std::vector<uint8_t> v = blob();
  return std::string(v.begin(), v.end());
}

void Reader::expect_done() const {
  if (!done()) raise(ErrorCode::MalformedFrame, "trailing bytes in body");
}

std::vector<uint8_t> SetupBody::encode() const {
  Writer w;
  w.u8(profile_id);
  w.u32(slot_count);
  w.u64(plaintext_modulus);
  w.u32(depth_budget);
  w.u8(batching);
  w.u8(backend_kind);
  w.bytes(public_token.id);
  w.u8(relin_keys);
  w.u8(rotation_keys);
  w.bytes(config_digest);
  return w.take();
}

SetupBody SetupBody::decode(std::span<const uint8_t> body) {
  Reader r(body);
  SetupBody s;
  s.profile_id = r.u8();
  s.slot_count = r.u32();
  s.plaintext_modulus = r.u64();
  s.depth_budget = r.u32();
  s.batching = r.u8();
  s.backend_kind = r.u8();
  auto tok = r.bytes(16);
  std::copy(tok.begin(), tok.end(), s.public_token.id.begin());
  s.relin_keys = r.u8();
  s.rotation_keys = r.u8();
  auto dig = r.bytes(16);
  std::copy(dig.begin(), dig.end(), s.config_digest.begin());
  r.expect_done();
  return s;
}

std::vector<uint8_t> QueryBody::encode() const {
  Writer w;
  w.u8(variant);
  w.u32(declared_size);
  w.u16(powers);
  w.u16(duplicates);
  w.u32(static_cast<uint32_t>(ciphertexts.size()));
  for (const auto& ct : ciphertexts) w.blob(ct);
  return w.take();
}

QueryBody QueryBody::decode(std::span<const uint8_t> body) {
  Reader r(body);
  QueryBody q;
  q.variant = r.u8();
  q.declared_size = r.u32();
  q.powers = r.u16();
  q.duplicates = r.u16();
  uint32_t n = r.u32();
  q.ciphertexts.reserve(n);
  for (uint32_t i = 0; i < n; ++i) q.ciphertexts.push_back(r.blob());
  r.expect_done();
  return q;
}

std::vector<uint8_t> ResponseBody::encode() const {
  Writer w;
  w.u8(agg_kind);
  w.u8(layout);
  w.u32(chunk_width);
  w.u64(set_count);
  w.u32(lane_stride);
  w.u16(repetitions);
  w.u32(static_cast<uint32_t>(ciphertexts.size()));
  for (const auto& ct : ciphertexts) w.blob(ct);
  return w.take();
}

ResponseBody ResponseBody::decode(std::span<const uint8_t> body) {
  Reader r(body);
  ResponseBody b;
  b.agg_kind = r.u8();
  b.layout = r.u8();
  b.chunk_width = r.u32();
  b.set_count = r.u64();
  b.lane_stride = r.u32();
  b.repetitions = r.u16();
  uint32_t n = r.u32();
  b.ciphertexts.reserve(n);
  for (uint32_t i = 0; i < n; ++i) b.ciphertexts.push_back(r.blob());
  r.expect_done();
  return b;
}

std::vector<uint8_t> ErrorBody::encode() const {
  Writer w;
  w.u16(code);
  w.str(text);
  return w.take();
}

ErrorBody ErrorBody::decode(std::span<const uint8_t> body) {
  Reader r(body);
  ErrorBody e;
  e.code = r.u16();
  e.text = r.str();
  r.expect_done();
  return e;
}

}  // namespace wire
}  // namespace pcm
