#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dufo/errors.hpp"

namespace dufo {

/// Integer address of a voxel at a fixed resolution. 64-bit per axis so no
/// re-centering is ever needed.
struct VoxelKey {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  std::int64_t iz = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

/// Per-scan observation state. Ordered lattice: a voxel seen both traversed
/// and occupied within one scan is occupied.
enum class VoxelState : std::uint8_t {
  Unknown = 0,
  Intersected = 1,
  Hit = 2,
};

/// Lattice join: commutative, associative, idempotent.
constexpr VoxelState merge_state(VoxelState a, VoxelState b) {
  return a < b ? b : a;
}

/// floor(c / voxel_size) per axis. Half-open boxes: a point exactly on a
/// boundary belongs to the higher-index voxel.
VoxelKey voxel_key(const Eigen::Vector3d& p, double voxel_size);

/// All keys at Chebyshev distance in [1, radius] of k; (2r+1)^3 - 1 keys,
/// never k itself.
std::vector<VoxelKey> neighborhood(const VoxelKey& k, int radius);

/// Method parameters. d_s and the voxel size are metric; d_p and the hit
/// extension count voxels.
struct Params {
  double voxel_size = 0.1;  ///< edge length, meters
  double d_s = 0.2;         ///< range-noise margin before each endpoint, meters
  int d_p = 1;              ///< localization-error neighborhood radius, voxels
  std::optional<double> max_range;     ///< drop points beyond this, meters
  std::optional<int> hit_extension;    ///< voxels past each endpoint; default d_p

  int effective_hit_extension() const { return hit_extension ? *hit_extension : d_p; }

  /// Throws InvalidInputError on non-finite or out-of-range values.
  void validate() const;
};

/// Inclusive axis-aligned index box, accumulated key by key.
struct IndexBounds {
  VoxelKey lo;
  VoxelKey hi;
  bool valid = false;

  void extend(const VoxelKey& k);
  bool contains(const VoxelKey& k) const;
  /// Number of voxels inside, saturating at uint64 max; 0 when invalid.
  std::uint64_t voxel_count() const;
};

namespace detail {

inline std::uint64_t hash_key(const VoxelKey& k) {
  std::uint64_t h = static_cast<std::uint64_t>(k.ix) * 0x9e3779b97f4a7c15ull;
  h ^= static_cast<std::uint64_t>(k.iy) * 0xc2b2ae3d27d4eb4full;
  h ^= static_cast<std::uint64_t>(k.iz) * 0x165667b19e3779f9ull;
  h ^= h >> 31;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

/// Open-addressed VoxelKey -> uint8 table with linear probing. Value 0 means
/// vacant; callers only store nonzero values and never erase, so no
/// tombstones are needed.
class VoxelTable {
 public:
  explicit VoxelTable(std::size_t expected = 0) { rehash(capacity_for(expected)); }

  std::uint8_t get(const VoxelKey& k) const {
    std::size_t i = detail::hash_key(k) & mask_;
    while (slots_[i].value != 0) {
      if (slots_[i].key == k) return slots_[i].value;
      i = (i + 1) & mask_;
    }
    return 0;
  }

  /// Stores max(old, value); value must be nonzero. Returns the new value.
  std::uint8_t merge_max(const VoxelKey& k, std::uint8_t value) {
    std::size_t i = detail::hash_key(k) & mask_;
    while (slots_[i].value != 0) {
      if (slots_[i].key == k) {
        if (value > slots_[i].value) slots_[i].value = value;
        return slots_[i].value;
      }
      i = (i + 1) & mask_;
    }
    slots_[i].key = k;
    slots_[i].value = value;
    ++size_;
    if (size_ * 10 >= slots_.size() * 7) grow();
    return value;
  }

  std::size_t size() const { return size_; }

  template <typename F>
  void for_each(F&& f) const {
    for (const Slot& s : slots_)
      if (s.value != 0) f(s.key, s.value);
  }

  void clear() {
    for (Slot& s : slots_) s.value = 0;
    size_ = 0;
  }

 private:
  struct Slot {
    VoxelKey key;
    std::uint8_t value = 0;
  };

  static std::size_t capacity_for(std::size_t expected) {
    std::size_t c = 64;
    while (c * 7 < expected * 10) c <<= 1;
    return c;
  }

  void rehash(std::size_t capacity) {
    slots_.assign(capacity, Slot{});
    mask_ = capacity - 1;
  }

  void grow() {
    std::vector<Slot> old = std::move(slots_);
    rehash(old.size() * 2);
    for (const Slot& s : old) {
      if (s.value == 0) continue;
      std::size_t i = detail::hash_key(s.key) & mask_;
      while (slots_[i].value != 0) i = (i + 1) & mask_;
      slots_[i] = s;
    }
  }

  std::vector<Slot> slots_;
  std::size_t size_ = 0;
  std::size_t mask_ = 0;
};

}  // namespace detail

/// Per-scan observation buffer: sparse key -> state map plus the index
/// bounding box of everything touched. Absent keys are Unknown.
class ScanScratch {
 public:
  explicit ScanScratch(double voxel_size) : voxel_size_(voxel_size) {}

  double voxel_size() const { return voxel_size_; }

  VoxelState state(const VoxelKey& k) const {
    return static_cast<VoxelState>(table_.get(k));
  }

  /// Join-write; never downgrades.
  void merge(const VoxelKey& k, VoxelState s) {
    if (s == VoxelState::Unknown) return;
    table_.merge_max(k, static_cast<std::uint8_t>(s));
    bounds_.extend(k);
  }

  const IndexBounds& bounds() const { return bounds_; }
  std::size_t touched() const { return table_.size(); }

  void clear() {
    table_.clear();
    bounds_ = IndexBounds{};
  }

  /// f(const VoxelKey&, VoxelState) for every non-Unknown entry,
  /// unspecified order.
  template <typename F>
  void for_each(F&& f) const {
    table_.for_each([&f](const VoxelKey& k, std::uint8_t v) {
      f(k, static_cast<VoxelState>(v));
    });
  }

 private:
  detail::VoxelTable table_;
  IndexBounds bounds_;
  double voxel_size_;
};

/// Persistent sparse set of void voxels. Membership is sticky: keys are only
/// ever added. Records the parameters it was built with.
class VoidMap {
 public:
  explicit VoidMap(const Params& params) : params_(params) { params_.validate(); }

  const Params& params() const { return params_; }
  double voxel_size() const { return params_.voxel_size; }

  bool contains(const VoxelKey& k) const { return table_.get(k) != 0; }
  std::size_t size() const { return table_.size(); }

  void mark(const VoxelKey& k) { table_.merge_max(k, 1); }

  template <typename F>
  void for_each(F&& f) const {
    table_.for_each([&f](const VoxelKey& k, std::uint8_t) { f(k); });
  }

  /// Members in lexicographic (ix, iy, iz) order, for comparisons and output.
  std::vector<VoxelKey> keys_sorted() const;

 private:
  detail::VoxelTable table_;
  Params params_;
};

/// Sets i_void for k; idempotent, never removes anything.
inline void mark_void(VoidMap& m, const VoxelKey& k) { m.mark(k); }

}  // namespace dufo
