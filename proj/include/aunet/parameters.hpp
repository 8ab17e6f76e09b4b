#ifndef AUNET_PARAMETERS_HPP
#define AUNET_PARAMETERS_HPP

#include "aunet/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace aunet {

/// Named tensors in insertion order. Names are unique.
template <typename Scalar>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> value;
  };

  void add(std::string name, Tensor<Scalar> value) {
    if (find(name) != nullptr) throw ContractError("duplicate parameter name '" + name + "'");
    entries_.push_back(Entry{std::move(name), std::move(value)});
  }

  Tensor<Scalar>* find(const std::string& name) {
    for (Entry& e : entries_) {
      if (e.name == name) return &e.value;
    }
    return nullptr;
  }
  const Tensor<Scalar>* find(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->find(name);
  }

  Tensor<Scalar>& at(const std::string& name) {
    Tensor<Scalar>* t = find(name);
    if (!t) throw ContractError("unknown parameter '" + name + "'");
    return *t;
  }
  const Tensor<Scalar>& at(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->at(name);
  }

  bool contains(const std::string& name) const { return find(name) != nullptr; }
  std::size_t size() const { return entries_.size(); }
  Index element_count() const {
    Index n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.name);
    return out;
  }

  template <typename To>
  ParameterSet<To> cast() const {
    ParameterSet<To> out;
    for (const Entry& e : entries_) out.add(e.name, e.value.template cast<To>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace aunet

#endif  // AUNET_PARAMETERS_HPP
