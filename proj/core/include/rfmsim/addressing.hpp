#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfmsim/sim_core.hpp"
#include "rfmsim/timing.hpp"

namespace rfmsim {

/// Physical address layout. Each field lists its bit positions, least
/// significant first. Together the fields partition [0, width).
struct AddressMap {
  int width = 34;
  std::vector<int> column{0, 1, 2, 3, 4, 5, 6, 13, 14, 15, 16, 17};
  std::vector<int> bank{7, 8};  ///< bank within its group
  std::vector<int> bankgroup{9, 10, 11};
  std::vector<int> subchannel{12};
  std::vector<int> rank;
  std::vector<int> row{18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33};

  std::vector<int> set_index{6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  int associativity = 16;
  int line_bits = 6;  ///< low bits addressing bytes within a line

  int banks_per_group() const noexcept { return 1 << bank.size(); }
  int banks() const noexcept { return 1 << (bank.size() + bankgroup.size()); }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct DramCoord {
  int subchannel = 0;
  int rank = 0;
  int bankgroup = 0;
  int bank = 0;  ///< flat id: bankgroup * banks_per_group + bank-in-group
  std::int64_t row = 0;
  std::int64_t column = 0;

  bool operator==(const DramCoord&) const = default;
};

/// Throws std::out_of_range if paddr does not fit in map.width bits.
DramCoord map_address(const AddressMap& map, std::uint64_t paddr);
/// Inverse of map_address.
std::uint64_t compose(const AddressMap& map, const DramCoord& coord);
std::uint64_t llc_set(const AddressMap& map, std::uint64_t paddr);

/// Addresses sharing one LLC set and one bank, all in different rows.
/// Throws std::invalid_argument when size <= associativity or when the row
/// bits outside the set index cannot give `size` distinct rows.
std::vector<std::uint64_t> build_eviction_set(const AddressMap& map, int target_bank, int size,
                                              int subchannel = 0, std::uint64_t set_seed = 0);

/// A random layout that satisfies every AddressMap invariant.
AddressMap random_layout(Rng& rng);

std::string format_hex(std::span<const std::uint64_t> addresses);

}  // namespace rfmsim
