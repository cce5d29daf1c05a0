#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

#include "lieflow/errors.hpp"

namespace lieflow {

/// Named collection of dense double tensors with paired gradient buffers.
/// Shapes are fixed at registration; iteration follows insertion order so
/// optimizer updates and serialization are deterministic.
class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols) {
    return add(name, Eigen::MatrixXd::Zero(rows, cols));
  }

  int add(const std::string& name, Eigen::MatrixXd init) {
    if (index_.count(name)) {
      throw std::invalid_argument("ParamStore: duplicate entry '" + name + "'");
    }
    const int id = static_cast<int>(entries_.size());
    Entry e;
    e.name = name;
    e.grad = Eigen::MatrixXd::Zero(init.rows(), init.cols());
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    index_.emplace(name, id);
    return id;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  int index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw std::invalid_argument("ParamStore: unknown entry '" + name + "'");
    }
    return it->second;
  }

  int size() const { return static_cast<int>(entries_.size()); }

  const std::string& name(int id) const { return entries_.at(id).name; }

  Eigen::MatrixXd& value(int id) { return entries_.at(id).value; }
  const Eigen::MatrixXd& value(int id) const { return entries_.at(id).value; }
  Eigen::MatrixXd& value(const std::string& name) { return value(index(name)); }
  const Eigen::MatrixXd& value(const std::string& name) const { return value(index(name)); }

  Eigen::MatrixXd& grad(int id) { return entries_.at(id).grad; }
  const Eigen::MatrixXd& grad(int id) const { return entries_.at(id).grad; }
  Eigen::MatrixXd& grad(const std::string& name) { return grad(index(name)); }
  const Eigen::MatrixXd& grad(const std::string& name) const { return grad(index(name)); }

  void zero_grad() {
    for (auto& e : entries_) e.grad.setZero();
  }

  /// Indices of all entries whose name starts with `prefix`.
  std::vector<int> indices_with_prefix(const std::string& prefix) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
      if (entries_[i].name.rfind(prefix, 0) == 0) out.push_back(i);
    }
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

 private:
  struct Entry {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
  };

  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace lieflow
