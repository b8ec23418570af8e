// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "m2g2/tensor.hpp"

namespace m2g2 {

/// Named learnable matrices with gradient accumulators and Adam moments.
///
/// Insertion order is preserved and defines iteration order everywhere
/// (optimizer updates, checkpoints, gradient checks), which keeps training
/// bit-reproducible.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor first_moment;
    Tensor second_moment;
  };

  void add(std::string name, Tensor init);
  bool contains(std::string_view name) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t index_of(std::string_view name) const;
  std::vector<std::string> names() const;

  Tensor& value(std::string_view name);
  const Tensor& value(std::string_view name) const;
  Tensor& grad(std::string_view name);
  const Tensor& grad(std::string_view name) const;

  std::span<Entry> entries() noexcept { return entries_; }
  std::span<const Entry> entries() const noexcept { return entries_; }

  std::uint64_t step() const noexcept { return step_; }
  /// True once a backward pass has written into the gradient slots and the
  /// optimizer has not consumed them yet.
  bool has_pending_gradients() const noexcept { return pending_; }
  void mark_gradients_pending() noexcept { pending_ = true; }
  void zero_grad();
  void advance_step() noexcept {
    ++step_;
    pending_ = false;
  }

  std::size_t parameter_count() const;

  /// Text checkpoint; see docs in README ("Checkpoint format").
  void save(std::ostream& os) const;
  static ParamStore load(std::istream& is);
  void save_file(const std::filesystem::path& path) const;
  static ParamStore load_file(const std::filesystem::path& path);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
  bool pending_ = false;
};

}  // namespace m2g2
