// SPDX-License-Identifier: Apache-2.0
#include "m2g2/param_store.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "m2g2/errors.hpp"

namespace m2g2 {
namespace {

constexpr std::string_view kMagic = "m2g2-params";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw DataError("checkpoint: malformed number '" + token + "'");
  }
  return v;
}

}  // namespace

void ParamStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) {
    throw InvalidInput("ParamStore: duplicate parameter '" + name + "'");
  }
  if (!init.all_finite()) {
    throw NonFiniteError("ParamStore: parameter '" + name + "' has non-finite values");
  }
  Entry e;
  e.name = name;
  e.grad = Tensor(init.rows(), init.cols());
  e.first_moment = Tensor(init.rows(), init.cols());
  e.second_moment = Tensor(init.rows(), init.cols());
  e.value = std::move(init);
  index_.emplace(std::move(name), entries_.size());
  entries_.push_back(std::move(e));
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw InvalidInput("ParamStore: unknown parameter '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

Tensor& ParamStore::value(std::string_view name) { return entries_[index_of(name)].value; }
const Tensor& ParamStore::value(std::string_view name) const {
  return entries_[index_of(name)].value;
}
Tensor& ParamStore::grad(std::string_view name) { return entries_[index_of(name)].grad; }
const Tensor& ParamStore::grad(std::string_view name) const {
  return entries_[index_of(name)].grad;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
  pending_ = false;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::save(std::ostream& os) const {
  os << kMagic << ' ' << kVersion << '\n';
  os << "count " << entries_.size() << '\n';
  os << "step " << step_ << '\n';
  for (const auto& e : entries_) {
    os << "param " << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << '\n';
    const auto vals = e.value.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      os << format_double(vals[i]) << (i + 1 == vals.size() ? '\n' : ' ');
    }
    if (vals.empty()) os << '\n';
  }
  os << "end\n";
}

ParamStore ParamStore::load(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic) {
    throw DataError("checkpoint: missing '" + std::string(kMagic) + "' header");
  }
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string key;
  std::size_t count = 0;
  std::uint64_t step = 0;
  if (!(is >> key >> count) || key != "count") throw DataError("checkpoint: expected 'count'");
  if (!(is >> key >> step) || key != "step") throw DataError("checkpoint: expected 'step'");

  ParamStore store;
  for (std::size_t p = 0; p < count; ++p) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(is >> key >> name >> rows >> cols) || key != "param") {
      throw DataError("checkpoint: malformed parameter header #" + std::to_string(p));
    }
    std::vector<double> values(rows * cols);
    std::string token;
    for (auto& v : values) {
      if (!(is >> token)) throw DataError("checkpoint: truncated values for '" + name + "'");
      v = parse_double(token);
    }
    store.add(name, Tensor(rows, cols, std::move(values)));
  }
  if (!(is >> key) || key != "end") throw DataError("checkpoint: missing 'end' marker");
  store.step_ = step;
  return store;
}

void ParamStore::save_file(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  save(os);
}

ParamStore ParamStore::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read checkpoint " + path.string());
  return load(is);
}

}  // namespace m2g2
