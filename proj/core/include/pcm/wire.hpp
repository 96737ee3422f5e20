#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcm/agg.hpp"
#include "pcm/backend.hpp"
#include "pcm/psi.hpp"

namespace pcm {
namespace wire {

constexpr uint8_t kMagic[3] = {'P', 'C', 'M'};
constexpr uint8_t kVersion = 0x01;

enum class MsgType : uint8_t {
  Hello = 1,
  Setup = 2,
  Query = 3,
  Response = 4,
  Error = 5,
};

struct WireMessage {
  MsgType type;
  std::vector<uint8_t> body;

  bool operator==(const WireMessage&) const = default;
};

/// Frame layout: magic "PCM", version byte, type byte, big-endian u32 body
/// length, body. Unknown versions are rejected, length mismatches are
/// malformed.
std::vector<uint8_t> encode_frame(const WireMessage& msg);
WireMessage decode_frame(std::span<const uint8_t> bytes);

/// Big-endian primitive writer/reader shared by the message bodies.
class Writer {
 public:
  void u8(uint8_t v);
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void bytes(std::span<const uint8_t> v);
  void blob(std::span<const uint8_t> v);  // u32 length prefix + bytes
  void str(const std::string& v);

  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  std::vector<uint8_t> bytes(size_t n);
  std::vector<uint8_t> blob();
  std::string str();
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const;

 private:
  void need(size_t n) const;

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

struct SetupBody {
  uint8_t profile_id = 0;
  uint32_t slot_count = 1;
  uint64_t plaintext_modulus = 0;
  uint32_t depth_budget = 0;
  uint8_t batching = 0;
  uint8_t backend_kind = 0;
  KeyToken public_token;
  uint8_t relin_keys = 1;
  uint8_t rotation_keys = 1;
  std::array<uint8_t, 16> config_digest{};

  std::vector<uint8_t> encode() const;
  static SetupBody decode(std::span<const uint8_t> body);
};

struct QueryBody {
  uint8_t variant = 0;
  uint32_t declared_size = 0;
  uint16_t powers = 1;
  uint16_t duplicates = 1;
  std::vector<std::vector<uint8_t>> ciphertexts;

  std::vector<uint8_t> encode() const;
  static QueryBody decode(std::span<const uint8_t> body);
};

/// Response metadata is fixed-size so that non-naive responses have a byte
/// size independent of the number of server sets.
struct ResponseBody {
  uint8_t agg_kind = 0;
  uint8_t layout = 0;  // ResponseLayout
  uint32_t chunk_width = 0;
  uint64_t set_count = 0;
  uint32_t lane_stride = 0;
  uint16_t repetitions = 1;
  std::vector<std::vector<uint8_t>> ciphertexts;

  std::vector<uint8_t> encode() const;
  static ResponseBody decode(std::span<const uint8_t> body);
};

struct ErrorBody {
  uint16_t code = 0;
  std::string text;

  std::vector<uint8_t> encode() const;
  static ErrorBody decode(std::span<const uint8_t> body);
};

}  // namespace wire
}  // namespace pcm
