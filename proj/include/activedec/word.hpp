#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace activedec {

/// A fixed-length vector tagged with its representation level so that channel
/// symbols, LLRs and bits cannot be mixed up at call sites.
template <class T, class Tag>
class Word {
 public:
  using value_type = T;

  Word() = default;
  explicit Word(std::size_t n, T fill = T{}) : values_(n, fill) {}
  explicit Word(std::vector<T> values) : values_(std::move(values)) {}
  Word(std::initializer_list<T> init) : values_(init) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::span<T> span() noexcept { return values_; }
  std::span<const T> span() const noexcept { return values_; }
  const std::vector<T>& values() const noexcept { return values_; }

  friend bool operator==(const Word&, const Word&) = default;

 private:
  std::vector<T> values_;
};

struct BitTag {};
struct SymbolTag {};
struct LlrTag {};

/// Hard bits in {0,1}.
using BitWord = Word<std::uint8_t, BitTag>;
/// Real channel symbols y (or x before noise).
using ReceivedWord = Word<double, SymbolTag>;
/// Log-likelihood ratios log P(c=0|y)/P(c=1|y); positive favors bit 0.
using LlrWord = Word<double, LlrTag>;

}  // namespace activedec
