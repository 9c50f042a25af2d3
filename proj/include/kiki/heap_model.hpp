// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Abstract dynamic objects and the memory-safety instrumentation.
///
/// Every malloc site i owns two objects: the summary dyn<i> and the
/// materialized dyn<i>co, which always stands for exactly one concrete object.
/// With memory-safety or leak checks on, dyn<i>co is one object picked
/// nondeterministically at allocation time and kept for the whole run. Without
/// them it is the most recent allocation, and each malloc folds the previous
/// one into the summary. Addresses are small integers: NULL is 0, dyn<i> is
/// 2i-1 and dyn<i>co is 2i.

#pragma once

#include <string>
#include <vector>

#include "kiki/minilang.hpp"
#include "kiki/term.hpp"

namespace kiki {

struct AbstractObject {
  enum class Kind { Summary, Materialized };
  int id = 0;
  int site = 0;
  std::string record;
  Kind kind = Kind::Summary;
  std::string name;  // "dyn1" or "dyn1co"

  /// State base name of field `f`, e.g. "dyn1.next".
  std::string field(const std::string& f) const { return name + "." + f; }
};

struct AddressSpace {
  std::vector<AbstractObject> objects;  // index 0 is NULL
  int width = 1;

  std::size_t size() const { return objects.size(); }
  const AbstractObject& at(int id) const { return objects.at(static_cast<std::size_t>(id)); }
  /// "NULL", "&dyn1", "&dyn1co".
  std::string address_name(int id) const;
  /// Ids of NULL plus every object whose record is `record`, ascending.
  std::vector<int> compatible(const std::string& record) const;
};

AddressSpace enumerate_addresses(const TypedProgram& p);

/// Ghost state names. The leading '$' keeps them apart from program names.
inline const std::string kFreedGhost = "$fr";
inline const std::string kLeakGhost = "$lk";
inline std::string co_chosen_ghost(int site) { return "$cochosen" + std::to_string(site); }
inline std::string allocated_ghost(int site) { return "$alloc" + std::to_string(site); }
inline std::string many_ghost(int site) { return "$many" + std::to_string(site); }

/// Which parts of the heap model are active for one encoding.
struct HeapConfig {
  int width = 8;               // integer width
  bool materialize = true;     // dyn<i>co objects exist
  bool recency = false;        // dyn<i>co is the most recent allocation
  bool track_freed = true;     // $fr and the freed-* assertions
  bool track_leak = true;      // $lk and the leak assertion
  bool memsafety_props = true;  // record null-*/freed-* properties
  bool malloc_may_fail = false;
};

/// The symbolic state the heap encoders read and update. Implemented by the
/// SSA builder; every `set` introduces a new version of the base name.
class HeapEncoder {
 public:
  virtual ~HeapEncoder() = default;
  virtual Term get(const std::string& base) = 0;
  virtual void set(const std::string& base, const Term& value) = 0;
  /// A fresh, unconstrained abstraction choice.
  virtual Term choice(const std::string& prefix, Sort sort) = 0;
  /// A fresh program input consumed at the current evaluation point.
  virtual Term input(const std::string& prefix, Sort sort, int bits) = 0;
  /// Checks `cond` at the current evaluation point. When `record` is set the
  /// check becomes an assertion for `property`; either way executions that
  /// fail it stop here.
  virtual void check(const std::string& property, const Term& cond, bool record) = 0;
  virtual int width() const = 0;
};

class HeapModel {
 public:
  HeapModel(const TypedProgram& p, const HeapConfig& cfg);

  const AddressSpace& addresses() const { return space_; }
  const HeapConfig& config() const { return cfg_; }
  Sort addr_sort() const { return Sort::address(space_.width); }
  Term address(int id) const { return mk_addr(id, space_.width); }
  Term null() const { return address(0); }

  /// Heap state variables (object fields, then ghosts) with their sorts, and
  /// the pointee record for pointer-valued ones.
  struct StateVar {
    std::string base;
    Sort sort;
    std::string record;  // pointee record of pointer fields and $fr/$lk ("" = any)
    Term init;
    std::string guard;   // fields: boolean ghost that holds while the object exists
  };
  const std::vector<StateVar>& state() const { return state_; }

  /// Encodes `malloc(record)` at `site`; returns the allocated address.
  Term encode_malloc(HeapEncoder& e, int site) const;
  /// Encodes a read of `p->field`; emits the dereference checks first.
  Term encode_read(HeapEncoder& e, const Term& p, const std::string& record, const std::string& field, Loc loc) const;
  /// Encodes `p->field = value`; emits the dereference checks first.
  void encode_write(HeapEncoder& e, const Term& p, const std::string& record, const std::string& field,
                    const Term& value, Loc loc) const;
  /// Encodes `free(p)`.
  void encode_free(HeapEncoder& e, const Term& p, const std::string& record, Loc loc) const;
  /// Emits the end-of-program leak assertion.
  void emit_leak_check(HeapEncoder& e) const;

 private:
  void deref_checks(HeapEncoder& e, const Term& p, Loc loc) const;
  Term encode_recent_malloc(HeapEncoder& e, int site) const;
  std::vector<const AbstractObject*> objects_of(const std::string& record) const;

  std::string exists_ghost(const AbstractObject& o) const;

  const Program* program_;
  HeapConfig cfg_;
  AddressSpace space_;
  std::vector<StateVar> state_;
};

}  // namespace kiki
