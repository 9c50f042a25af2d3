// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include "kiki/heap_model.hpp"

#include "kiki/interpreter.hpp"

namespace kiki {

std::string AddressSpace::address_name(int id) const {
  if (id == 0) return "NULL";
  if (id < 0 || static_cast<std::size_t>(id) >= objects.size()) return "&?" + std::to_string(id);
  return "&" + at(id).name;
}

std::vector<int> AddressSpace::compatible(const std::string& record) const {
  std::vector<int> ids{0};
  for (std::size_t i = 1; i < objects.size(); ++i)
    if (objects[i].record == record) ids.push_back(static_cast<int>(i));
  return ids;
}

AddressSpace enumerate_addresses(const TypedProgram& p) {
  std::vector<std::string> site_record;
  for_each_stmt(p.program.body, [&](const Stmt& s) {
    if (s.kind != Stmt::Kind::Malloc) return;
    if (static_cast<int>(site_record.size()) < s.site_id) site_record.resize(static_cast<std::size_t>(s.site_id));
    site_record[static_cast<std::size_t>(s.site_id - 1)] = s.record;
  });
  AddressSpace a;
  a.objects.push_back(AbstractObject{0, 0, "", AbstractObject::Kind::Summary, "NULL"});
  for (std::size_t i = 0; i < site_record.size(); ++i) {
    int site = static_cast<int>(i) + 1;
    std::string base = "dyn" + std::to_string(site);
    a.objects.push_back({2 * site - 1, site, site_record[i], AbstractObject::Kind::Summary, base});
    a.objects.push_back({2 * site, site, site_record[i], AbstractObject::Kind::Materialized, base + "co"});
  }
  while ((std::size_t{1} << a.width) < a.objects.size()) ++a.width;
  return a;
}

HeapModel::HeapModel(const TypedProgram& p, const HeapConfig& cfg)
    : program_(&p.program), cfg_(cfg), space_(enumerate_addresses(p)) {
  if (!cfg_.materialize) cfg_.track_freed = cfg_.track_leak = cfg_.recency = false;
  if (cfg_.recency) cfg_.track_freed = cfg_.track_leak = false;
  // Without allocation sites every pointer is NULL.
  if (space_.size() == 1) cfg_.track_freed = cfg_.track_leak = false;
  for (std::size_t i = 1; i < space_.size(); ++i) {
    const auto& o = space_.objects[i];
    if (o.kind == AbstractObject::Kind::Materialized && !cfg_.materialize) continue;
    for (const auto& [f, t] : program_->record(o.record)->fields) {
      if (t.is_ptr())
        state_.push_back({o.field(f), addr_sort(), t.record, null(), exists_ghost(o)});
      else
        state_.push_back({o.field(f), Sort::integer(cfg_.width), "", mk_int(0, cfg_.width), exists_ghost(o)});
    }
  }
  if (cfg_.track_freed) state_.push_back({kFreedGhost, addr_sort(), "", null(), ""});
  if (cfg_.track_leak) state_.push_back({kLeakGhost, addr_sort(), "", null(), ""});
  const int sites = static_cast<int>(space_.size() / 2);
  for (int s = 1; s <= sites; ++s) {
    if (cfg_.materialize) state_.push_back({co_chosen_ghost(s), Sort::boolean(), "", mk_false(), ""});
    state_.push_back({allocated_ghost(s), Sort::boolean(), "", mk_false(), ""});
    state_.push_back({many_ghost(s), Sort::boolean(), "", mk_false(), ""});
  }
}

std::string HeapModel::exists_ghost(const AbstractObject& o) const {
  return o.kind == AbstractObject::Kind::Summary ? allocated_ghost(o.site) : co_chosen_ghost(o.site);
}

std::vector<const AbstractObject*> HeapModel::objects_of(const std::string& record) const {
  std::vector<const AbstractObject*> out;
  for (std::size_t i = 1; i < space_.size(); ++i) {
    const auto& o = space_.objects[i];
    if (o.record != record) continue;
    if (o.kind == AbstractObject::Kind::Materialized && !cfg_.materialize) continue;
    out.push_back(&o);
  }
  return out;
}

Term HeapModel::encode_malloc(HeapEncoder& e, int site) const {
  if (cfg_.recency) return encode_recent_malloc(e, site);
  const AbstractObject& sum = space_.at(2 * site - 1);
  const AbstractObject& co = space_.at(2 * site);
  const auto& fields = program_->record(sum.record)->fields;
  auto zero = [&](const VarType& t) { return t.is_ptr() ? null() : mk_int(0, e.width()); };

  Term failed = cfg_.malloc_may_fail ? e.input("mfail", Sort::boolean(), 1) : mk_false();
  Term use_co = mk_false();
  if (cfg_.materialize) {
    Term chosen = e.get(co_chosen_ghost(site));
    use_co = mk_and({mk_not(failed), e.choice("choose", Sort::boolean()), mk_not(chosen)});
    e.set(co_chosen_ghost(site), mk_or(chosen, use_co));
    for (const auto& [f, t] : fields) e.set(co.field(f), mk_mux(use_co, zero(t), e.get(co.field(f))));
    // Before its first use the materialized object cannot be the freed or
    // the leaked one; cut states may still claim so.
    for (const std::string& g : {kFreedGhost, kLeakGhost}) {
      if ((g == kFreedGhost && !cfg_.track_freed) || (g == kLeakGhost && !cfg_.track_leak)) continue;
      Term v = e.get(g);
      e.set(g, mk_mux(mk_and(use_co, mk_eq(v, address(co.id))), null(), v));
    }
  }
  Term ret = mk_mux(failed, null(), mk_mux(use_co, address(co.id), address(sum.id)));

  // The first summary allocation initialises the summary exactly; later ones
  // may or may not be the object the summary cell describes.
  Term to_summary = mk_and(mk_not(failed), mk_not(use_co));
  Term allocated = e.get(allocated_ghost(site));
  Term zero_sel = mk_and(to_summary, mk_or(mk_not(allocated), e.choice("wz", Sort::boolean())));
  for (const auto& [f, t] : fields) e.set(sum.field(f), mk_mux(zero_sel, zero(t), e.get(sum.field(f))));
  e.set(many_ghost(site), mk_or(e.get(many_ghost(site)), mk_and(to_summary, allocated)));
  e.set(allocated_ghost(site), mk_or(allocated, to_summary));

  if (cfg_.track_leak) {
    Term latch = mk_and(mk_not(failed), e.choice("lklatch", Sort::boolean()));
    e.set(kLeakGhost, mk_mux(latch, ret, e.get(kLeakGhost)));
  }
  return ret;
}

Term HeapModel::encode_recent_malloc(HeapEncoder& e, int site) const {
  const AbstractObject& sum = space_.at(2 * site - 1);
  const AbstractObject& co = space_.at(2 * site);
  const auto& fields = program_->record(sum.record)->fields;
  const Term co_addr = address(co.id);
  const Term sum_addr = address(sum.id);

  Term failed = cfg_.malloc_may_fail ? e.input("mfail", Sort::boolean(), 1) : mk_false();
  Term co_live = e.get(co_chosen_ghost(site));
  Term demote = mk_and(mk_not(failed), co_live);

  // Everything pointing at the old recent object now points into the summary.
  // A pointer to it implies it exists, so the test does not consult co_live.
  auto redirect = [&](const std::string& base) {
    Term v = e.get(base);
    e.set(base, mk_mux(mk_and(mk_not(failed), mk_eq(v, co_addr)), sum_addr, v));
  };
  for (const auto& v : program_->vars)
    if (v.type.is_ptr() && v.type.record == sum.record) redirect(v.name);
  for (const auto& sv : state_)
    if (sv.sort.is_addr() && sv.record == sum.record) redirect(sv.base);

  // The summary cell either keeps describing an older object or switches to
  // the one being folded in; the first object folded in is taken exactly.
  Term allocated = e.get(allocated_ghost(site));
  Term take = mk_and(demote, mk_or(mk_not(allocated), e.choice("wz", Sort::boolean())));
  for (const auto& [f, t] : fields) e.set(sum.field(f), mk_mux(take, e.get(co.field(f)), e.get(sum.field(f))));
  e.set(many_ghost(site), mk_or(e.get(many_ghost(site)), mk_and(demote, allocated)));
  e.set(allocated_ghost(site), mk_or(allocated, demote));

  for (const auto& [f, t] : fields) {
    Term zero = t.is_ptr() ? null() : mk_int(0, e.width());
    e.set(co.field(f), mk_mux(failed, e.get(co.field(f)), zero));
  }
  e.set(co_chosen_ghost(site), mk_or(co_live, mk_not(failed)));
  return mk_mux(failed, null(), co_addr);
}

void HeapModel::deref_checks(HeapEncoder& e, const Term& p, Loc loc) const {
  e.check(mem_property(MemErrorKind::NullDeref, loc), mk_neq(p, null()), cfg_.memsafety_props);
  if (cfg_.track_freed)
    e.check(mem_property(MemErrorKind::UseAfterFree, loc), mk_neq(p, e.get(kFreedGhost)), cfg_.memsafety_props);
}

Term HeapModel::encode_read(HeapEncoder& e, const Term& p, const std::string& record, const std::string& field,
                            Loc loc) const {
  deref_checks(e, p, loc);
  const VarType* ft = program_->record(record)->field_type(field);
  Sort sort = ft->is_ptr() ? addr_sort() : Sort::integer(e.width());
  Term value = e.choice("read", sort);
  auto objs = objects_of(record);
  for (auto it = objs.rbegin(); it != objs.rend(); ++it)
    value = mk_mux(mk_eq(p, address((*it)->id)), e.get((*it)->field(field)), value);
  return value;
}

void HeapModel::encode_write(HeapEncoder& e, const Term& p, const std::string& record, const std::string& field,
                             const Term& value, Loc loc) const {
  deref_checks(e, p, loc);
  for (const AbstractObject* o : objects_of(record)) {
    Term hit = mk_eq(p, address(o->id));
    if (o->kind == AbstractObject::Kind::Summary) {
      // Strong while the site has produced at most one summary object.
      Term many = e.get(many_ghost(o->site));
      hit = mk_and(hit, mk_or(mk_not(many), e.choice("ws", Sort::boolean())));
    }
    e.set(o->field(field), mk_mux(hit, value, e.get(o->field(field))));
  }
}

void HeapModel::encode_free(HeapEncoder& e, const Term& p, const std::string& record, Loc loc) const {
  e.check(mem_property(MemErrorKind::NullFree, loc), mk_neq(p, null()), cfg_.memsafety_props);
  if (cfg_.track_freed) {
    e.check(mem_property(MemErrorKind::DoubleFree, loc), mk_neq(p, e.get(kFreedGhost)), cfg_.memsafety_props);
    std::vector<Term> is_co;
    for (const AbstractObject* o : objects_of(record))
      if (o->kind == AbstractObject::Kind::Materialized) is_co.push_back(mk_eq(p, address(o->id)));
    Term latch = mk_and(mk_or(is_co), e.choice("frlatch", Sort::boolean()));
    e.set(kFreedGhost, mk_mux(latch, p, e.get(kFreedGhost)));
  }
  if (cfg_.track_leak) {
    Term lk = e.get(kLeakGhost);
    e.set(kLeakGhost, mk_mux(mk_eq(p, lk), null(), lk));
  }
}

void HeapModel::emit_leak_check(HeapEncoder& e) const {
  if (cfg_.track_leak) e.check("leak", mk_eq(e.get(kLeakGhost), null()), true);
}

}  // namespace kiki
