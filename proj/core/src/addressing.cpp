#include "rfmsim/addressing.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "rfmsim/timing.hpp"

namespace rfmsim {

namespace {

std::uint64_t extract(std::uint64_t paddr, const std::vector<int>& bits) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) v |= ((paddr >> bits[i]) & 1u) << i;
  return v;
}

std::uint64_t deposit(std::uint64_t value, const std::vector<int>& bits) {
  std::uint64_t a = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) a |= ((value >> i) & 1u) << bits[i];
  return a;
}

}  // namespace

void AddressMap::validate() const {
  if (width < 1 || width > 63) throw ConfigError("address.width must be in [1, 63]");
  std::vector<int> owner(static_cast<std::size_t>(width), -1);
  const std::vector<int>* fields[] = {&column, &bank, &bankgroup, &subchannel, &rank, &row};
  const char* names[] = {"column", "bank", "bankgroup", "subchannel", "rank", "row"};
  for (int f = 0; f < 6; ++f) {
    for (int b : *fields[f]) {
      if (b < 0 || b >= width) throw ConfigError(std::string("address.") + names[f] + ": bit out of range");
      auto& o = owner[static_cast<std::size_t>(b)];
      if (o >= 0)
        throw ConfigError(std::string("address.") + names[f] + ": bit " + std::to_string(b) + " already used by " +
                          names[o]);
      o = f;
    }
  }
  for (int b = 0; b < width; ++b)
    if (owner[static_cast<std::size_t>(b)] < 0)
      throw ConfigError("address: bit " + std::to_string(b) + " belongs to no field");
  if (row.empty()) throw ConfigError("address.row must not be empty");

  std::set<int> set_bits(set_index.begin(), set_index.end());
  if (set_bits.size() != set_index.size()) throw ConfigError("address.set_index has duplicate bits");
  for (int b : set_index)
    if (b < line_bits || b >= width) throw ConfigError("address.set_index: bit outside the line-aligned address");
  for (const auto* field : {&bank, &bankgroup, &subchannel})
    for (int b : *field)
      if (!set_bits.count(b)) throw ConfigError("address: bank bits must lie inside address.set_index");
  for (int b = 0; b < line_bits; ++b)
    if (owner[static_cast<std::size_t>(b)] != 0) throw ConfigError("address: line offset bits must be column bits");
  if (associativity < 1) throw ConfigError("address.associativity must be >= 1");
}

DramCoord map_address(const AddressMap& map, std::uint64_t paddr) {
  if (map.width < 64 && (paddr >> map.width) != 0) throw std::out_of_range("address beyond configured width");
  DramCoord c;
  c.subchannel = static_cast<int>(extract(paddr, map.subchannel));
  c.rank = static_cast<int>(extract(paddr, map.rank));
  c.bankgroup = static_cast<int>(extract(paddr, map.bankgroup));
  c.bank = c.bankgroup * map.banks_per_group() + static_cast<int>(extract(paddr, map.bank));
  c.row = static_cast<std::int64_t>(extract(paddr, map.row));
  c.column = static_cast<std::int64_t>(extract(paddr, map.column));
  return c;
}

std::uint64_t compose(const AddressMap& map, const DramCoord& c) {
  const int per_group = map.banks_per_group();
  return deposit(static_cast<std::uint64_t>(c.subchannel), map.subchannel) |
         deposit(static_cast<std::uint64_t>(c.rank), map.rank) |
         deposit(static_cast<std::uint64_t>(c.bank / per_group), map.bankgroup) |
         deposit(static_cast<std::uint64_t>(c.bank % per_group), map.bank) |
         deposit(static_cast<std::uint64_t>(c.row), map.row) |
         deposit(static_cast<std::uint64_t>(c.column), map.column);
}

std::uint64_t llc_set(const AddressMap& map, std::uint64_t paddr) { return extract(paddr, map.set_index); }

std::vector<std::uint64_t> build_eviction_set(const AddressMap& map, int target_bank, int size, int subchannel,
                                              std::uint64_t set_seed) {
  map.validate();
  if (size <= map.associativity)
    throw std::invalid_argument("eviction set size " + std::to_string(size) + " must exceed associativity " +
                                std::to_string(map.associativity));
  if (target_bank < 0 || target_bank >= map.banks()) throw std::invalid_argument("target bank out of range");
  if (subchannel < 0 || subchannel >= (1 << map.subchannel.size()))
    throw std::invalid_argument("sub-channel out of range");

  // Pick the set: seed bits for the free set-index positions, then force the
  // bank fields. Everything outside the set index is zero except free row bits.
  std::uint64_t base = deposit(set_seed, map.set_index);
  DramCoord want;
  want.subchannel = subchannel;
  want.bank = target_bank;
  const std::uint64_t bank_mask = deposit(~0ull, map.bank) | deposit(~0ull, map.bankgroup) |
                                  deposit(~0ull, map.subchannel);
  base = (base & ~bank_mask) | (compose(map, want) & bank_mask);

  std::vector<int> free_rows;
  for (int b : map.row)
    if (std::find(map.set_index.begin(), map.set_index.end(), b) == map.set_index.end()) free_rows.push_back(b);
  if (free_rows.size() < 63 && (std::uint64_t{1} << free_rows.size()) < static_cast<std::uint64_t>(size))
    throw std::invalid_argument("only " + std::to_string(free_rows.size()) + " row bits outside the set index; " +
                                "cannot form " + std::to_string(size) + " distinct rows");

  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) out.push_back(base | deposit(static_cast<std::uint64_t>(i), free_rows));
  return out;
}

AddressMap random_layout(Rng& rng) {
  AddressMap m;
  m.width = 30 + static_cast<int>(rng.below(11));
  m.line_bits = 6;
  const int set_bits = 8 + static_cast<int>(rng.below(5));
  m.set_index.clear();
  for (int b = m.line_bits; b < m.line_bits + set_bits; ++b) m.set_index.push_back(b);

  // Bank, bank-group and sub-channel bits come from a shuffled set index.
  std::vector<int> pool = m.set_index;
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  const int nb = 1 + static_cast<int>(rng.below(2));
  const int ng = 1 + static_cast<int>(rng.below(3));
  const int ns = static_cast<int>(rng.below(2));
  std::size_t k = 0;
  m.bank.assign(pool.begin(), pool.begin() + nb);
  k += static_cast<std::size_t>(nb);
  m.bankgroup.assign(pool.begin() + static_cast<long>(k), pool.begin() + static_cast<long>(k) + ng);
  k += static_cast<std::size_t>(ng);
  m.subchannel.assign(pool.begin() + static_cast<long>(k), pool.begin() + static_cast<long>(k) + ns);
  k += static_cast<std::size_t>(ns);
  m.rank.clear();
  m.row.clear();
  m.column.clear();
  // Leftover set-index bits split between column and row.
  for (std::size_t i = k; i < pool.size(); ++i) (rng.below(2) ? m.row : m.column).push_back(pool[i]);
  for (int b = 0; b < m.line_bits; ++b) m.column.push_back(b);
  // Above the set index: at least eight row bits, the rest shuffled.
  const int top = m.line_bits + set_bits;
  for (int b = top; b < m.width; ++b) {
    const bool high = b >= m.width - 8;
    (high || rng.below(3) != 0 ? m.row : m.column).push_back(b);
  }
  std::sort(m.column.begin(), m.column.end());
  std::sort(m.row.begin(), m.row.end());
  std::sort(m.bank.begin(), m.bank.end());
  std::sort(m.bankgroup.begin(), m.bankgroup.end());
  m.associativity = 4 + static_cast<int>(rng.below(29));
  m.validate();
  return m;
}

std::string format_hex(std::span<const std::uint64_t> addresses) {
  std::string out;
  char buf[24];
  for (auto a : addresses) {
    std::snprintf(buf, sizeof buf, "0x%llx\n", static_cast<unsigned long long>(a));
    out += buf;
  }
  return out;
}

}  // namespace rfmsim
