#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mars/ad/optim.hpp"
#include "mars/ad/var.hpp"

namespace mars::ad {

/// "MARSCKPT" | u32 version | u64 config hash | records until EOF.
/// Record: u32 name length | name | u32 rank | u32 dims[rank] | f32 values.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  struct Record {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
  };

  std::uint64_t config_hash = 0;
  std::vector<Record> records;

  std::vector<std::uint8_t> encode() const;
  static Checkpoint decode(std::span<const std::uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const Record* find(const std::string& name) const;
  const Record& at(const std::string& name) const;

  template <typename T>
  void add(const std::string& name, const Matrix<T>& m) {
    Record r{name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
    r.values.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) r.values[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
    records.push_back(std::move(r));
  }

  void add_scalar(const std::string& name, double v) {
    records.push_back({name, {1}, {static_cast<float>(v)}});
  }

  template <typename T>
  Matrix<T> matrix(const std::string& name) const {
    const Record& r = at(name);
    const Eigen::Index rows = r.dims.empty() ? 1 : r.dims[0];
    const Eigen::Index cols = r.dims.size() < 2 ? 1 : static_cast<Eigen::Index>(r.values.size()) / std::max<Eigen::Index>(rows, 1);
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(r.values[static_cast<std::size_t>(i)]);
    return m;
  }

  template <typename T>
  void add_parameters(const ParameterList<T>& params) {
    for (auto* p : params) add(p->name, p->value());
  }

  /// Loads every parameter by name; shapes must match exactly.
  template <typename T>
  void load_parameters(const ParameterList<T>& params) const {
    for (auto* p : params) {
      Matrix<T> m = matrix<T>(p->name);
      require(m.rows() == p->value().rows() && m.cols() == p->value().cols(),
              "checkpoint: shape mismatch for " + p->name, ErrorCategory::kConfigMismatch);
      p->mutable_value() = std::move(m);
    }
  }

  /// Moments stored as "<prefix>.m/<name>", "<prefix>.v/<name>" plus
  /// "<prefix>.step".
  template <typename T>
  void add_optimizer(Adam<T>& opt, const std::string& prefix = "adam") {
    const auto& ps = opt.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      add(prefix + ".m/" + ps[i]->name, opt.first_moments()[i]);
      add(prefix + ".v/" + ps[i]->name, opt.second_moments()[i]);
    }
    add_integer(prefix + ".step", opt.steps());
  }

  template <typename T>
  void load_optimizer(Adam<T>& opt, const std::string& prefix = "adam") const {
    const auto& ps = opt.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      opt.first_moments()[i] = matrix<T>(prefix + ".m/" + ps[i]->name);
      opt.second_moments()[i] = matrix<T>(prefix + ".v/" + ps[i]->name);
    }
    opt.set_steps(integer(prefix + ".step"));
  }

  /// Stored as four 16-bit limbs so float values hold it exactly.
  void add_integer(const std::string& name, std::int64_t v) {
    Record r{name, {4}, {}};
    auto u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 4; ++i) r.values.push_back(static_cast<float>((u >> (16 * i)) & 0xffff));
    records.push_back(std::move(r));
  }

  std::int64_t integer(const std::string& name) const {
    const Record& r = at(name);
    require(r.values.size() == 4, "checkpoint: record " + name + " is not an integer", ErrorCategory::kConfigMismatch);
    std::uint64_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint64_t>(r.values[static_cast<std::size_t>(i)]) << (16 * i);
    return static_cast<std::int64_t>(u);
  }
};

}  // namespace mars::ad
