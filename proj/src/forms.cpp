#include "folcoil/forms.hpp"

#include <algorithm>
#include <array>

namespace folcoil {
namespace {

constexpr int kMaxSpace = 8;

struct BasisTable {
  std::array<std::array<std::vector<MultiIndex>, kMaxSpace + 2>, kMaxSpace + 1> sets;
  std::array<std::map<MultiIndex, int>, kMaxSpace + 1> position;

  BasisTable() {
    for (int m = 0; m <= kMaxSpace; ++m) {
      for (unsigned mask = 0; mask < (1u << m); ++mask) {
        MultiIndex I;
        for (int b = 0; b < m; ++b)
          if (mask & (1u << b)) I.push_back(b);
        sets[m][I.size()].push_back(I);
      }
      for (int k = 0; k <= m; ++k) {
        std::sort(sets[m][k].begin(), sets[m][k].end());
        for (int i = 0; i < static_cast<int>(sets[m][k].size()); ++i) position[m][sets[m][k][i]] = i;
      }
    }
  }
};

const BasisTable& table() {
  static const BasisTable t;
  return t;
}

}  // namespace

int binomial(int m, int k) {
  if (k < 0 || k > m) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (m - k + i) / i;
  return static_cast<int>(r);
}

const std::vector<MultiIndex>& basis_indices(int m, int k) {
  static const std::vector<MultiIndex> empty;
  if (m < 0 || m > kMaxSpace) throw DomainError("form space dimension out of range");
  if (k < 0 || k > m) return empty;
  return table().sets[m][k];
}

int basis_position(int m, const MultiIndex& I) {
  const auto& pos = table().position.at(m);
  auto it = pos.find(I);
  if (it == pos.end()) throw DomainError("not an increasing multi-index");
  return it->second;
}

int wedge_sign(const MultiIndex& I, const MultiIndex& J, MultiIndex& out) {
  out.clear();
  out.insert(out.end(), I.begin(), I.end());
  out.insert(out.end(), J.begin(), J.end());
  int inversions = 0;
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t b = a + 1; b < out.size(); ++b) {
      if (out[a] == out[b]) return 0;
      if (out[a] > out[b]) ++inversions;
    }
  std::sort(out.begin(), out.end());
  return inversions % 2 ? -1 : 1;
}

FullForm exterior_d(const FullForm& w) {
  std::vector<int> axes(w.space_dim());
  for (int a = 0; a < w.space_dim(); ++a) axes[a] = a;
  return coordinate_d(w, axes);
}

}  // namespace folcoil
