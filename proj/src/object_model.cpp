#include "cvm/object_model.hpp"

#include "cvm/error.hpp"
#include "cvm/verifier.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace cvm {

bool Class::inherits_from(const Class& other) const noexcept {
    for (const Class* c = this; c != nullptr; c = c->superclass) {
        if (c == &other) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// ObjectInstance

ObjectInstance::ObjectInstance(std::uint64_t object_id, const Class& klass, std::size_t indexed_size,
                               std::optional<ActorId> owning_actor)
    : id(object_id),
      cls(&klass),
      owner(owning_actor),
      field_count_(klass.field_count()),
      indexed_size_(indexed_size),
      slots_(klass.field_count() + indexed_size, Value{Nil{}}) {}

namespace {

[[noreturn]] void field_out_of_range(const ObjectInstance& obj, std::size_t index) {
    throw Error(ErrorKind::FieldIndexOutOfRange, "field " + std::to_string(index) + " of " + obj.cls->name +
                                                     " (" + std::to_string(obj.field_count()) + " fields)");
}

[[noreturn]] void index_out_of_range(const ObjectInstance& obj, std::size_t index) {
    throw Error(ErrorKind::IndexOutOfBounds, "index " + std::to_string(index + 1) + " of " + obj.cls->name +
                                                 " of length " + std::to_string(obj.indexed_size()));
}

}  // namespace

Value ObjectInstance::load_field(std::size_t index) const {
    if (index >= field_count_) field_out_of_range(*this, index);
    std::lock_guard lock(slots_mutex_);
    return slots_[index];
}

void ObjectInstance::store_field(std::size_t index, const Value& value) {
    if (index >= field_count_) field_out_of_range(*this, index);
    std::lock_guard lock(slots_mutex_);
    slots_[index] = value;
}

Value ObjectInstance::load_indexed(std::size_t index) const {
    if (index >= indexed_size_) index_out_of_range(*this, index);
    std::lock_guard lock(slots_mutex_);
    return slots_[field_count_ + index];
}

void ObjectInstance::store_indexed(std::size_t index, const Value& value) {
    if (index >= indexed_size_) index_out_of_range(*this, index);
    std::lock_guard lock(slots_mutex_);
    slots_[field_count_ + index] = value;
}

std::vector<Value> ObjectInstance::snapshot() const {
    std::lock_guard lock(slots_mutex_);
    return slots_;
}

std::string LoadedMethod::display_name() const {
    std::string name = holder != nullptr ? holder->name : std::string("?");
    const LoadedMethod* outer = this;
    while (outer->is_block && outer->lexical_parent != nullptr) outer = outer->lexical_parent;
    name += ">>";
    name += outer->selector != nullptr ? outer->selector->name : std::string("?");
    if (is_block) {
        name += "[";
        name += label;
        name += "]";
    }
    return name;
}

// ---------------------------------------------------------------------------
// Program

Program::Program(bytecode::ProgramImage image) : image_(std::move(image)) {}

std::shared_ptr<const Program> Program::load(bytecode::ProgramImage image) {
    std::shared_ptr<Program> program(new Program(std::move(image)));
    program->link();
    return program;
}

const SymbolInfo& Program::intern(std::string_view name) {
    auto it = symbols_.find(std::string(name));
    if (it != symbols_.end()) return *it->second;
    auto info = std::make_unique<SymbolInfo>();
    info->name = std::string(name);
    info->arity = static_cast<std::uint8_t>(std::min<std::size_t>(bytecode::selector_arity(name), 255));
    info->primitive = primitive_for_selector(name);
    const SymbolInfo& ref = *info;
    symbols_.emplace(info->name, std::move(info));
    return ref;
}

const SymbolInfo* Program::find_symbol(std::string_view name) const noexcept {
    auto it = symbols_.find(std::string(name));
    return it == symbols_.end() ? nullptr : it->second.get();
}

const Class* Program::find_class(std::string_view name) const noexcept {
    auto it = class_index_.find(name);
    return it == class_index_.end() ? nullptr : it->second;
}

Class& Program::add_class(std::string name, const Class* superclass) {
    auto cls = std::make_unique<Class>();
    cls->name = std::move(name);
    cls->superclass = superclass;
    if (superclass != nullptr) {
        cls->field_names = superclass->field_names;
        cls->indexed = superclass->indexed;
    }
    Class& ref = *cls;
    classes_.push_back(std::move(cls));
    class_index_.emplace(ref.name, &ref);
    return ref;
}

namespace {

[[noreturn]] void link_error(const std::string& message) {
    throw Error(ErrorKind::VerifyError, message);
}

}  // namespace

void Program::link() {
    object_class_ = &add_class("Object", nullptr);
    Class& array = add_class("Array", object_class_);
    array.indexed = true;
    array_class_ = &array;
    Class& system = add_class("System", object_class_);
    system.abstract = true;
    system_class_ = &system;

    std::unordered_map<std::string_view, const bytecode::CompiledClass*> pending;
    for (const auto& cc : image_.classes) {
        if (cc.name.empty()) link_error("class with empty name");
        if (find_class(cc.name) != nullptr || !pending.emplace(cc.name, &cc).second) {
            link_error("duplicate class " + cc.name);
        }
    }

    // Superclasses may be declared after their subclasses.
    std::unordered_map<std::string_view, Class*> linked;
    std::set<std::string_view> in_progress;
    std::function<const Class*(const bytecode::CompiledClass&)> link_class =
        [&](const bytecode::CompiledClass& cc) -> const Class* {
        if (auto it = linked.find(cc.name); it != linked.end()) return it->second;
        if (!in_progress.insert(cc.name).second) link_error("superclass cycle through " + cc.name);
        const Class* super = find_class(cc.superclass);
        if (super == nullptr) {
            auto it = pending.find(cc.superclass);
            if (it == pending.end()) link_error("class " + cc.name + ": unknown superclass " + cc.superclass);
            super = link_class(*it->second);
        }
        if (super == system_class_) link_error("class " + cc.name + " cannot inherit from System");
        Class& cls = add_class(cc.name, super);
        for (const auto& field : cc.fields) {
            if (std::find(cls.field_names.begin(), cls.field_names.end(), field) != cls.field_names.end()) {
                link_error("class " + cc.name + ": duplicate field " + field);
            }
            cls.field_names.push_back(field);
        }
        linked.emplace(cc.name, &cls);
        return &cls;
    };
    for (const auto& cc : image_.classes) link_class(cc);

    for (const auto& cc : image_.classes) {
        Class& cls = *linked.at(cc.name);
        for (const auto& m : cc.methods) {
            LoadedMethod& lm = link_method(m, cls, nullptr);
            if (!cls.methods.emplace(lm.selector, &lm).second) {
                link_error("class " + cc.name + ": duplicate selector " + m.selector);
            }
        }
    }

    for (auto& method : methods_) method->max_stack = verify_method(*method, image_.mode);

    entry_class_ = find_class(image_.entry_class);
    if (entry_class_ == nullptr) link_error("entry class " + image_.entry_class + " is not defined");
    if (entry_class_->abstract || entry_class_->indexed) {
        link_error("entry class " + image_.entry_class + " cannot be instantiated");
    }
    auto found = lookup(intern(image_.entry_selector), *entry_class_);
    if (!found) link_error("entry method " + image_.entry_class + ">>" + image_.entry_selector + " is not defined");
    entry_method_ = found->method;
}

LoadedMethod& Program::link_method(const bytecode::Method& source, Class& holder, const LoadedMethod* parent) {
    auto owned = std::make_unique<LoadedMethod>();
    LoadedMethod& lm = *owned;
    methods_.push_back(std::move(owned));

    lm.source = &source;
    lm.holder = &holder;
    lm.lexical_parent = parent;
    lm.is_block = parent != nullptr;
    lm.num_args = source.num_args;
    lm.num_locals = source.num_locals;
    lm.code = source.code;
    if (lm.is_block) {
        lm.label = source.selector;
    } else {
        lm.selector = &intern(source.selector);
        if (source.num_args != lm.selector->arity) {
            link_error(holder.name + ">>" + source.selector + " declares " + std::to_string(source.num_args) +
                       " arguments but its selector takes " + std::to_string(lm.selector->arity));
        }
    }

    lm.literals.reserve(source.literals.size());
    for (const auto& literal : source.literals) {
        RuntimeLiteral rt;
        std::visit(
            [&](const auto& lit) {
                using T = std::decay_t<decltype(lit)>;
                if constexpr (std::is_same_v<T, std::int64_t>) {
                    rt.kind = RuntimeLiteral::Kind::Constant;
                    rt.value = lit;
                } else if constexpr (std::is_same_v<T, bytecode::SymbolLiteral>) {
                    rt.kind = RuntimeLiteral::Kind::Selector;
                    rt.value = Symbol{&intern(lit.name)};
                } else if constexpr (std::is_same_v<T, bytecode::StringLiteral>) {
                    rt.kind = RuntimeLiteral::Kind::Constant;
                    rt.value = String{&lit.text};
                } else if constexpr (std::is_same_v<T, bytecode::GlobalLiteral>) {
                    rt.kind = RuntimeLiteral::Kind::Global;
                    rt.global.name = lit.name;
                    using K = GlobalBinding::Kind;
                    if (lit.name == "self") {
                        rt.global.kind = K::Self;
                    } else if (lit.name == "true") {
                        rt.global.kind = K::True;
                    } else if (lit.name == "false") {
                        rt.global.kind = K::False;
                    } else if (lit.name == "nil") {
                        rt.global.kind = K::Nil;
                    } else if (const Class* cls = find_class(lit.name)) {
                        rt.global.kind = K::ClassRef;
                        rt.global.cls = cls;
                    } else {
                        rt.global.kind = K::Unbound;
                    }
                } else {
                    if (!lit.method) link_error(holder.name + ">>" + source.selector + ": empty block literal");
                    rt.kind = RuntimeLiteral::Kind::Block;
                    rt.block = &link_method(*lit.method, holder, &lm);
                }
            },
            literal);
        lm.literals.push_back(std::move(rt));
    }
    return lm;
}

std::optional<LookupResult> lookup(const SymbolInfo& selector, const Class& cls) noexcept {
    for (const Class* c = &cls; c != nullptr; c = c->superclass) {
        auto it = c->methods.find(&selector);
        if (it != c->methods.end()) return LookupResult{it->second, c};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Display

namespace {

std::string with_article(const std::string& name) {
    bool vowel = !name.empty() && std::string_view("AEIOUaeiou").find(name.front()) != std::string_view::npos;
    return (vowel ? "an " : "a ") + name;
}

void display_into(std::ostream& out, const Value& value, int depth) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Nil>) {
                out << "nil";
            } else if constexpr (std::is_same_v<T, bool>) {
                out << (v ? "true" : "false");
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                out << v;
            } else if constexpr (std::is_same_v<T, Symbol>) {
                out << '#' << v.info->name;
            } else if constexpr (std::is_same_v<T, String>) {
                out << *v.text;
            } else if constexpr (std::is_same_v<T, BlockClosure*>) {
                out << "a Block";
            } else if constexpr (std::is_same_v<T, ObjectInstance*>) {
                if (!v->cls->indexed) {
                    out << with_article(v->cls->name);
                } else if (depth > 4) {
                    out << "(...)";
                } else {
                    out << '(';
                    for (std::size_t i = 0; i < v->indexed_size(); ++i) {
                        if (i > 0) out << ' ';
                        display_into(out, v->load_indexed(i), depth + 1);
                    }
                    out << ')';
                }
            } else if constexpr (std::is_same_v<T, const Class*>) {
                out << v->name;
            } else if constexpr (std::is_same_v<T, ThreadHandle>) {
                out << "a Thread(" << v.id << ')';
            } else if constexpr (std::is_same_v<T, ActorHandle>) {
                out << "an Actor(" << v.id << ')';
            } else {
                out << "a RemoteReference(" << v.actor << ':' << v.object << ')';
            }
        },
        value);
}

std::int64_t fnv1a(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return static_cast<std::int64_t>(h >> 1);
}

std::int64_t hash_of(const Value& value) {
    return std::visit(
        [](const auto& v) -> std::int64_t {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Nil>) {
                return 0;
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? 1 : 2;
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return v;
            } else if constexpr (std::is_same_v<T, Symbol>) {
                return fnv1a(v.info->name);
            } else if constexpr (std::is_same_v<T, String>) {
                return fnv1a(*v.text);
            } else if constexpr (std::is_same_v<T, BlockClosure*>) {
                return static_cast<std::int64_t>(v->id);
            } else if constexpr (std::is_same_v<T, ObjectInstance*>) {
                return static_cast<std::int64_t>(v->id);
            } else if constexpr (std::is_same_v<T, const Class*>) {
                return fnv1a(v->name);
            } else if constexpr (std::is_same_v<T, ThreadHandle> || std::is_same_v<T, ActorHandle>) {
                return static_cast<std::int64_t>(v.id);
            } else {
                return static_cast<std::int64_t>((std::uint64_t{v.actor} << 40) ^ v.object);
            }
        },
        value);
}

}  // namespace

std::string display_string(const Value& value) {
    std::ostringstream out;
    display_into(out, value, 0);
    return out.str();
}

std::string class_name_of(const Value& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Nil>) {
                return "UndefinedObject";
            } else if constexpr (std::is_same_v<T, bool>) {
                return "Boolean";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return "Integer";
            } else if constexpr (std::is_same_v<T, Symbol>) {
                return "Symbol";
            } else if constexpr (std::is_same_v<T, String>) {
                return "String";
            } else if constexpr (std::is_same_v<T, BlockClosure*>) {
                return "Block";
            } else if constexpr (std::is_same_v<T, ObjectInstance*>) {
                return v->cls->name;
            } else if constexpr (std::is_same_v<T, const Class*>) {
                return v->name + " class";
            } else if constexpr (std::is_same_v<T, ThreadHandle>) {
                return "Thread";
            } else if constexpr (std::is_same_v<T, ActorHandle>) {
                return "Actor";
            } else {
                return "RemoteReference";
            }
        },
        value);
}

// ---------------------------------------------------------------------------
// Primitives

Primitive primitive_for_selector(std::string_view s) noexcept {
    struct Entry {
        std::string_view selector;
        Primitive primitive;
    };
    static constexpr Entry kTable[] = {
        {"+", Primitive::Add},
        {"-", Primitive::Subtract},
        {"*", Primitive::Multiply},
        {"/", Primitive::Divide},
        {"%", Primitive::Modulo},
        {"=", Primitive::Equal},
        {"<", Primitive::Less},
        {">", Primitive::Greater},
        {"print", Primitive::Print},
        {"asString", Primitive::AsString},
        {"hash", Primitive::Hash},
        {"ifTrue:", Primitive::IfTrue},
        {"ifFalse:", Primitive::IfFalse},
        {"ifTrue:ifFalse:", Primitive::IfTrueIfFalse},
        {"not", Primitive::Not},
        {"and:", Primitive::And},
        {"or:", Primitive::Or},
        {"value", Primitive::BlockValue},
        {"value:", Primitive::BlockValueWith},
        {"value:value:", Primitive::BlockValueWithWith},
        {"whileTrue:", Primitive::WhileTrue},
        {"new", Primitive::New},
        {"new:", Primitive::NewSized},
        {"at:", Primitive::At},
        {"at:put:", Primitive::AtPut},
        {"length", Primitive::Length},
        {"concat:", Primitive::Concat},
        {"join", Primitive::Join},
        {"print:", Primitive::PrintColon},
        {"println:", Primitive::PrintlnColon},
        {"exit:", Primitive::ExitColon},
    };
    for (const auto& e : kTable) {
        if (e.selector == s) return e.primitive;
    }
    return Primitive::None;
}

namespace {

[[noreturn]] void type_error(const SymbolInfo& selector, const Value& receiver, const std::string& expected,
                             const Value& actual) {
    throw Error(ErrorKind::PrimitiveTypeError, class_name_of(receiver) + ">>" + selector.name + " expects " + expected +
                                                   ", got " + class_name_of(actual));
}

std::int64_t integer_arg(const SymbolInfo& selector, const Value& receiver, const Value& arg) {
    if (const auto* i = std::get_if<std::int64_t>(&arg)) return *i;
    type_error(selector, receiver, "an Integer", arg);
}

BlockClosure* block_arg(const SymbolInfo& selector, const Value& receiver, const Value& arg) {
    if (auto* const* b = std::get_if<BlockClosure*>(&arg)) return *b;
    type_error(selector, receiver, "a Block", arg);
}

std::int64_t wrap(std::uint64_t v) { return static_cast<std::int64_t>(v); }

PrimitiveResult integer_primitive(const SymbolInfo& sel, std::int64_t r, const Value& receiver,
                                  std::span<const Value> args, PrimitiveHost& host) {
    auto u = static_cast<std::uint64_t>(r);
    switch (sel.primitive) {
    case Primitive::Add: return Value{wrap(u + static_cast<std::uint64_t>(integer_arg(sel, receiver, args[0])))};
    case Primitive::Subtract: return Value{wrap(u - static_cast<std::uint64_t>(integer_arg(sel, receiver, args[0])))};
    case Primitive::Multiply: return Value{wrap(u * static_cast<std::uint64_t>(integer_arg(sel, receiver, args[0])))};
    case Primitive::Divide:
    case Primitive::Modulo: {
        std::int64_t d = integer_arg(sel, receiver, args[0]);
        if (d == 0) throw Error(ErrorKind::DivisionByZero, std::to_string(r) + " " + sel.name + " 0");
        bool is_div = sel.primitive == Primitive::Divide;
        if (d == -1) return Value{is_div ? wrap(0 - u) : std::int64_t{0}};
        return Value{is_div ? r / d : r % d};
    }
    case Primitive::Less: return Value{r < integer_arg(sel, receiver, args[0])};
    case Primitive::Greater: return Value{r > integer_arg(sel, receiver, args[0])};
    case Primitive::AsString: return Value{host.make_string(std::to_string(r))};
    default: return std::monostate{};
    }
}

PrimitiveResult boolean_primitive(const SymbolInfo& sel, bool r, const Value& receiver, std::span<const Value> args) {
    switch (sel.primitive) {
    case Primitive::IfTrue: {
        BlockClosure* b = block_arg(sel, receiver, args[0]);
        if (r) return ActivateBlock{b, {}};
        return Value{Nil{}};
    }
    case Primitive::IfFalse: {
        BlockClosure* b = block_arg(sel, receiver, args[0]);
        if (!r) return ActivateBlock{b, {}};
        return Value{Nil{}};
    }
    case Primitive::IfTrueIfFalse: {
        BlockClosure* t = block_arg(sel, receiver, args[0]);
        BlockClosure* f = block_arg(sel, receiver, args[1]);
        return ActivateBlock{r ? t : f, {}};
    }
    case Primitive::Not: return Value{!r};
    case Primitive::And:
    case Primitive::Or: {
        bool short_circuit = sel.primitive == Primitive::And ? !r : r;
        if (short_circuit) return Value{r};
        if (const auto* b = std::get_if<bool>(&args[0])) return Value{*b};
        return ActivateBlock{block_arg(sel, receiver, args[0]), {}};
    }
    default: return std::monostate{};
    }
}

PrimitiveResult block_primitive(const SymbolInfo& sel, BlockClosure* r, const Value& receiver,
                                std::span<const Value> args) {
    switch (sel.primitive) {
    case Primitive::BlockValue:
    case Primitive::BlockValueWith:
    case Primitive::BlockValueWithWith: return ActivateBlock{r, std::vector<Value>(args.begin(), args.end())};
    case Primitive::WhileTrue: return StartLoop{r, block_arg(sel, receiver, args[0])};
    default: return std::monostate{};
    }
}

PrimitiveResult class_primitive(const SymbolInfo& sel, const Class* cls, const Value& receiver,
                                std::span<const Value> args, const Program& program, PrimitiveHost& host) {
    if (cls == &program.system_class()) {
        switch (sel.primitive) {
        case Primitive::PrintColon:
            host.write_output(display_string(args[0]));
            return Value{args[0]};
        case Primitive::PrintlnColon:
            host.write_output(display_string(args[0]) + "\n");
            return Value{args[0]};
        case Primitive::ExitColon: return ExitRequest{integer_arg(sel, receiver, args[0])};
        default: break;
        }
    }
    switch (sel.primitive) {
    case Primitive::New:
        if (cls->abstract) {
            throw Error(ErrorKind::PrimitiveTypeError, cls->name + " cannot be instantiated");
        }
        return Value{host.instantiate(*cls, 0)};
    case Primitive::NewSized: {
        if (!cls->indexed) return std::monostate{};
        std::int64_t n = integer_arg(sel, receiver, args[0]);
        if (n < 0 || n > (std::int64_t{1} << 24)) {
            throw Error(ErrorKind::IndexOutOfBounds, cls->name + " new: " + std::to_string(n));
        }
        return Value{host.instantiate(*cls, static_cast<std::size_t>(n))};
    }
    default: return std::monostate{};
    }
}

std::size_t array_index(const SymbolInfo& sel, const ObjectInstance& obj, const Value& receiver, const Value& arg) {
    std::int64_t i = integer_arg(sel, receiver, arg);
    if (i < 1 || static_cast<std::uint64_t>(i) > obj.indexed_size()) {
        throw Error(ErrorKind::IndexOutOfBounds,
                    "index " + std::to_string(i) + " of " + obj.cls->name + " of length " +
                        std::to_string(obj.indexed_size()));
    }
    return static_cast<std::size_t>(i - 1);
}

PrimitiveResult array_primitive(const SymbolInfo& sel, ObjectInstance* obj, const Value& receiver,
                                std::span<const Value> args) {
    switch (sel.primitive) {
    case Primitive::At: return Value{obj->load_indexed(array_index(sel, *obj, receiver, args[0]))};
    case Primitive::AtPut:
        obj->store_indexed(array_index(sel, *obj, receiver, args[0]), args[1]);
        return Value{args[1]};
    case Primitive::Length: return Value{static_cast<std::int64_t>(obj->indexed_size())};
    default: return std::monostate{};
    }
}

const std::string* text_of(const Value& v) {
    if (const auto* s = std::get_if<String>(&v)) return s->text;
    if (const auto* y = std::get_if<Symbol>(&v)) return &y->info->name;
    return nullptr;
}

}  // namespace

PrimitiveResult invoke_primitive(const SymbolInfo& selector, const Value& receiver, std::span<const Value> args,
                                 const Program& program, PrimitiveHost& host) {
    if (selector.primitive == Primitive::None) return std::monostate{};
    if (args.size() != selector.arity) return std::monostate{};

    PrimitiveResult specific = std::monostate{};
    if (const auto* i = std::get_if<std::int64_t>(&receiver)) {
        specific = integer_primitive(selector, *i, receiver, args, host);
    } else if (const auto* b = std::get_if<bool>(&receiver)) {
        specific = boolean_primitive(selector, *b, receiver, args);
    } else if (auto* const* blk = std::get_if<BlockClosure*>(&receiver)) {
        specific = block_primitive(selector, *blk, receiver, args);
    } else if (const auto* cls = std::get_if<const Class*>(&receiver)) {
        specific = class_primitive(selector, *cls, receiver, args, program, host);
    } else if (auto* const* obj = std::get_if<ObjectInstance*>(&receiver)) {
        if ((*obj)->cls->indexed) specific = array_primitive(selector, *obj, receiver, args);
    } else if (const auto* t = std::get_if<ThreadHandle>(&receiver)) {
        if (selector.primitive == Primitive::Join) specific = JoinThread{*t};
    } else if (const std::string* text = text_of(receiver)) {
        if (selector.primitive == Primitive::Concat) {
            const std::string* other = text_of(args[0]);
            if (other == nullptr) type_error(selector, receiver, "a String or Symbol", args[0]);
            specific = Value{host.make_string(*text + *other)};
        } else if (selector.primitive == Primitive::AsString && std::holds_alternative<Symbol>(receiver)) {
            specific = Value{host.make_string(*text)};
        } else if (selector.primitive == Primitive::Length) {
            specific = Value{static_cast<std::int64_t>(text->size())};
        }
    }
    if (!std::holds_alternative<std::monostate>(specific)) return specific;

    // Answered by every value.
    switch (selector.primitive) {
    case Primitive::Equal: return Value{same_value(receiver, args[0])};
    case Primitive::Hash: return Value{hash_of(receiver)};
    case Primitive::Print: host.write_output(display_string(receiver)); return Value{receiver};
    case Primitive::AsString:
        if (std::holds_alternative<String>(receiver)) return Value{receiver};
        return Value{host.make_string(display_string(receiver))};
    default: return std::monostate{};
    }
}

}  // namespace cvm
