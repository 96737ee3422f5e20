#include "pcm/backend.hpp"

#include <algorithm>
#include <bit>

namespace pcm {

namespace {

thread_local int g_counter_pause_depth = 0;

}  // namespace

CounterPause::CounterPause() { ++g_counter_pause_depth; }
CounterPause::~CounterPause() { --g_counter_pause_depth; }
bool CounterPause::active() { return g_counter_pause_depth > 0; }

HEParams HEParams::profile(std::string_view name) {
  if (name == "P8k") return custom(8192, 4079617, 2, true, "P8k");
  if (name == "P16k") return custom(16384, 163841, 7, true, "P16k");
  if (name == "P32k") return custom(32768, 786433, 16, true, "P32k");
  raise(ErrorCode::InvalidParams, "unknown profile: " + std::string(name));
}

HEParams HEParams::custom(uint32_t slot_count, uint64_t plaintext_modulus,
                          uint32_t depth_budget, bool batching, std::string name) {
  if (slot_count == 0 || (slot_count & (slot_count - 1)) != 0) {
    raise(ErrorCode::InvalidParams, "slot_count must be a power of two");
  }
  HEParams p{slot_count, PrimeModulus(plaintext_modulus), depth_budget, std::move(name),
             batching};
  p.validate();
  return p;
}

void HEParams::validate() const {
  if (batching && (q() - 1) % (2ull * slot_count) != 0) {
    raise(ErrorCode::InvalidParams,
          "batching requires 2*slot_count to divide plaintext_modulus - 1");
  }
}

uint8_t HEParams::profile_id() const {
  if (profile_name == "P8k") return 1;
  if (profile_name == "P16k") return 2;
  if (profile_name == "P32k") return 3;
  return 0;
}

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::ClearRing: return "clear_ring";
    case BackendKind::DepthTracked: return "depth_tracked";
    case BackendKind::RlweAdapter: return "rlwe_adapter";
  }
  return "unknown";
}

CostSnapshot CostSnapshot::operator-(const CostSnapshot& o) const {
  return CostSnapshot{ct_add - o.ct_add, ct_mul - o.ct_mul, pt_mul - o.pt_mul,
                      rotations - o.rotations, exponentiations - o.exponentiations};
}

CostSnapshot HeBackend::cost_snapshot() const {
  return CostSnapshot{counters_.ct_add.load(), counters_.ct_mul.load(),
                      counters_.pt_mul.load(), counters_.rotations.load(),
                      counters_.exponentiations.load()};
}

void HeBackend::reset_costs() {
  counters_.ct_add = 0;
  counters_.ct_mul = 0;
  counters_.pt_mul = 0;
  counters_.rotations = 0;
  counters_.exponentiations = 0;
}

void HeBackend::count_exponentiation() { counters_.exponentiations.fetch_add(1); }

Ciphertext HeBackend::encrypt_scalar(const PublicKey& pk, uint64_t value) {
  return encrypt(pk, std::span<const uint64_t>(&value, 1));
}

Ciphertext HeBackend::add_scalar(const Ciphertext& a, uint64_t b) {
  std::vector<uint64_t> v(params().slot_count, b);
  return add_plain(a, v);
}

Ciphertext HeBackend::sub_scalar(const Ciphertext& a, uint64_t b) {
  std::vector<uint64_t> v(params().slot_count, b);
  return sub_plain(a, v);
}

Ciphertext HeBackend::mul_scalar(const Ciphertext& a, uint64_t b) {
  std::vector<uint64_t> v(params().slot_count, b);
  return mul_plain(a, v);
}

namespace {

/// Shared in-memory model for both ClearRing and DepthTracked. ClearRing has
/// an unbounded budget; DepthTracked enforces params.depth_budget at
/// decryption time.
class ModelBackend final : public HeBackend {
 public:
  ModelBackend(BackendKind kind, HEParams params)
      : kind_(kind), params_(std::move(params)) {
    params_.validate();
  }

  BackendKind kind() const override { return kind_; }
  const HEParams& params() const override { return params_; }

  KeyPair keygen(SeededRng& rng) override {
    params_.validate();
    KeyPair kp{PublicKey{}, SecretKey{}, params_};
    // One 128-bit identity per pair; decryption succeeds only for ciphertexts
    // carrying the same token.
    rng.fill(kp.pk.token.id.data(), kp.pk.token.id.size());
    kp.sk.token = kp.pk.token;
    return kp;
  }

  Ciphertext encrypt(const PublicKey& pk, std::span<const uint64_t> values) override {
    if (values.size() > params_.slot_count) {
      raise(ErrorCode::SlotOverflow, "plaintext longer than slot_count");
    }
    const uint64_t q = params_.q();
    Ciphertext ct;
    ct.backend_id = kind_;
    ct.key = pk.token;
    ct.depth_used = 0;
    ct.freshness = Freshness::Fresh;
    ct.slots.assign(params_.slot_count, 0);
    for (size_t i = 0; i < values.size(); ++i) {
      if (values[i] >= q) raise(ErrorCode::InvalidParams, "plaintext value out of range");
      ct.slots[i] = values[i];
    }
    return ct;
  }

  std::optional<std::vector<uint64_t>> decrypt(const SecretKey& sk,
                                               const Ciphertext& ct) override {
    if (ct.backend_id != kind_) raise(ErrorCode::BackendMismatch, "foreign ciphertext");
    if (!(sk.token == ct.key)) raise(ErrorCode::WrongKey, "secret key does not match");
    if (depth_budget() != kUnboundedDepth && ct.depth_used > depth_budget()) {
      return std::nullopt;  // models noise-budget exhaustion
    }
    return ct.slots;
  }

  Ciphertext add(const Ciphertext& a, const Ciphertext& b) override {
    check_pair(a, b);
    count_add();
    return combine(a, b, [&](uint64_t x, uint64_t y) { return add_mod(x, y, q()); },
                   std::max(a.depth_used, b.depth_used));
  }

  Ciphertext sub(const Ciphertext& a, const Ciphertext& b) override {
    check_pair(a, b);
    count_add();
    return combine(a, b, [&](uint64_t x, uint64_t y) { return sub_mod(x, y, q()); },
                   std::max(a.depth_used, b.depth_used));
  }

  Ciphertext add_plain(const Ciphertext& a, std::span<const uint64_t> b) override {
    check_plain(a, b);
    count_add();
    return map_plain(a, b, [&](uint64_t x, uint64_t y) { return add_mod(x, y, q()); });
  }

  Ciphertext sub_plain(const Ciphertext& a, std::span<const uint64_t> b) override {
    check_plain(a, b);
    count_add();
    return map_plain(a, b, [&](uint64_t x, uint64_t y) { return sub_mod(x, y, q()); });
  }

  Ciphertext sub_from_plain(std::span<const uint64_t> b, const Ciphertext& a) override {
    check_plain(a, b);
    count_add();
    return map_plain(a, b, [&](uint64_t x, uint64_t y) { return sub_mod(y, x, q()); });
  }

  Ciphertext mul(const Ciphertext& a, const Ciphertext& b) override {
    check_pair(a, b);
    if (!CounterPause::active()) counters_.ct_mul.fetch_add(1);
    return combine(a, b, [&](uint64_t x, uint64_t y) { return mul_mod(x, y, q()); },
                   std::max(a.depth_used, b.depth_used) + 1);
  }

  Ciphertext mul_plain(const Ciphertext& a, std::span<const uint64_t> b) override {
    check_plain(a, b);
    if (!CounterPause::active()) {
      counters_.ct_mul.fetch_add(1);
      counters_.pt_mul.fetch_add(1);
    }
    return map_plain(a, b, [&](uint64_t x, uint64_t y) { return mul_mod(x, y, q()); });
  }

  Ciphertext rotate(const Ciphertext& ct, int64_t k, const PublicKey& pk) override {
    check_own(ct);
    if (!pk.rotation_keys) raise(ErrorCode::MissingRotationKeys, "rotate");
    if (!(pk.token == ct.key)) raise(ErrorCode::BackendMismatch, "key mismatch");
    if (!CounterPause::active()) counters_.rotations.fetch_add(1);
    const int64_t n = static_cast<int64_t>(params_.slot_count);
    int64_t shift = ((k % n) + n) % n;
    Ciphertext out = ct;
    out.freshness = Freshness::Evaluated;
    for (int64_t i = 0; i < n; ++i) out.slots[i] = ct.slots[(i + shift) % n];
    return out;
  }

  Ciphertext slot_reduce(const Ciphertext& ct, ReduceOp op, uint32_t width,
                         const PublicKey& pk) override {
    check_own(ct);
    if (width == 0 || (width & (width - 1)) != 0 || width > params_.slot_count) {
      raise(ErrorCode::InvalidParams, "slot_reduce width must be a power of two <= slot_count");
    }
    if (width == 1) return ct;
    if (!pk.rotation_keys) raise(ErrorCode::MissingRotationKeys, "slot_reduce");
    Ciphertext acc = ct;
    for (uint32_t step = width / 2; step >= 1; step /= 2) {
      Ciphertext rotated = rotate(acc, step, pk);
      acc = op == ReduceOp::Sum ? add(acc, rotated) : mul(acc, rotated);
    }
    return acc;
  }

 private:
  uint64_t q() const { return params_.q(); }

  uint32_t depth_budget() const {
    return kind_ == BackendKind::ClearRing ? kUnboundedDepth : params_.depth_budget;
  }

  void count_add() {
    if (!CounterPause::active()) counters_.ct_add.fetch_add(1);
  }

  void check_own(const Ciphertext& a) const {
    if (a.backend_id != kind_) raise(ErrorCode::BackendMismatch, "foreign ciphertext");
    if (a.slots.size() != params_.slot_count) {
      raise(ErrorCode::BackendMismatch, "slot count mismatch");
    }
  }

  void check_pair(const Ciphertext& a, const Ciphertext& b) const {
    check_own(a);
    check_own(b);
    if (!(a.key == b.key)) raise(ErrorCode::BackendMismatch, "operands under different keys");
  }

  void check_plain(const Ciphertext& a, std::span<const uint64_t> b) const {
    check_own(a);
    if (b.size() != params_.slot_count) {
      raise(ErrorCode::BackendMismatch, "plaintext vector length mismatch");
    }
  }

  template <typename F>
  Ciphertext combine(const Ciphertext& a, const Ciphertext& b, F f, uint32_t depth) const {
    Ciphertext out = a;
    out.depth_used = depth;
    out.freshness = Freshness::Evaluated;
    for (size_t i = 0; i < out.slots.size(); ++i) out.slots[i] = f(a.slots[i], b.slots[i]);
    return out;
  }

  template <typename F>
  Ciphertext map_plain(const Ciphertext& a, std::span<const uint64_t> b, F f) const {
    Ciphertext out = a;
    out.freshness = Freshness::Evaluated;
    for (size_t i = 0; i < out.slots.size(); ++i) {
      uint64_t v = b[i];
      if (v >= q()) raise(ErrorCode::InvalidParams, "plaintext value out of range");
      out.slots[i] = f(a.slots[i], v);
    }
    return out;
  }

  BackendKind kind_;
  HEParams params_;
};

void append_varint(std::vector<uint8_t>& out, uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<uint8_t>(v) | 0x80);
    v >>= 7;
  }
  out.push_back(static_cast<uint8_t>(v));
}

uint64_t read_varint(std::span<const uint8_t> bytes, size_t& pos) {
  uint64_t v = 0;
  int shift = 0;
  while (true) {
    if (pos >= bytes.size()) raise(ErrorCode::MalformedFrame, "truncated varint");
    uint8_t b = bytes[pos++];
    v |= static_cast<uint64_t>(b & 0x7f) << shift;
    if ((b & 0x80) == 0) break;
    shift += 7;
    if (shift > 63) raise(ErrorCode::MalformedFrame, "varint too long");
  }
  return v;
}

}  // namespace

std::unique_ptr<HeBackend> make_backend(BackendKind kind, const HEParams& params) {
  switch (kind) {
    case BackendKind::ClearRing:
    case BackendKind::DepthTracked:
      return std::make_unique<ModelBackend>(kind, params);
    case BackendKind::RlweAdapter:
      raise(ErrorCode::InvalidParams,
            "no RLWE backend is linked; implement HeBackend against a lattice library");
  }
  raise(ErrorCode::InvalidParams, "unknown backend kind");
}

std::vector<uint8_t> serialize_ciphertext(const Ciphertext& ct, const HEParams& params) {
  std::vector<uint8_t> out;
  out.reserve(8 + ct.slots.size() * 4);
  out.push_back(0x01);
  out.push_back(static_cast<uint8_t>(ct.backend_id));
  out.push_back(params.profile_id());
  append_varint(out, ct.depth_used);
  for (uint64_t slot : ct.slots) {
    if (slot >= (uint64_t{1} << 32)) {
      raise(ErrorCode::InvalidParams, "model wire format packs 32-bit words; q too large");
    }
    uint32_t w = static_cast<uint32_t>(slot);
    out.push_back(static_cast<uint8_t>(w));
    out.push_back(static_cast<uint8_t>(w >> 8));
    out.push_back(static_cast<uint8_t>(w >> 16));
    out.push_back(static_cast<uint8_t>(w >> 24));
  }
  return out;
}

Ciphertext deserialize_ciphertext(std::span<const uint8_t> bytes, const HEParams& params,
                                  const KeyToken& key, Freshness freshness) {
  size_t pos = 0;
  if (bytes.size() < 3) raise(ErrorCode::MalformedFrame, "ciphertext too short");
  if (bytes[pos++] != 0x01) raise(ErrorCode::UnsupportedVersion, "ciphertext version");
  uint8_t kind_byte = bytes[pos++];
  if (kind_byte < 1 || kind_byte > 3) raise(ErrorCode::MalformedFrame, "backend id");
  uint8_t profile = bytes[pos++];
  if (profile != 0 && profile != params.profile_id()) {
    raise(ErrorCode::MalformedFrame, "ciphertext profile does not match session params");
  }
  Ciphertext ct;
  ct.backend_id = static_cast<BackendKind>(kind_byte);
  ct.key = key;
  ct.depth_used = static_cast<uint32_t>(read_varint(bytes, pos));
  if (bytes.size() - pos != static_cast<size_t>(params.slot_count) * 4) {
    raise(ErrorCode::MalformedFrame, "ciphertext payload length");
  }
  ct.slots.resize(params.slot_count);
  for (uint32_t i = 0; i < params.slot_count; ++i) {
    uint32_t w = static_cast<uint32_t>(bytes[pos]) | static_cast<uint32_t>(bytes[pos + 1]) << 8 |
                 static_cast<uint32_t>(bytes[pos + 2]) << 16 |
                 static_cast<uint32_t>(bytes[pos + 3]) << 24;
    pos += 4;
    if (w >= params.q()) raise(ErrorCode::MalformedFrame, "slot value out of range");
    ct.slots[i] = w;
  }
  ct.freshness = ct.depth_used == 0 ? freshness : Freshness::Evaluated;
  return ct;
}

}  // namespace pcm
