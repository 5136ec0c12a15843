#include "cvm/assembler.hpp"

#include "cvm/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <vector>

namespace cvm {

using bytecode::Literal;
using bytecode::Method;

namespace {

struct Token {
    std::string_view text;
    std::size_t column = 1;
};

[[noreturn]] void fail(ErrorKind kind, std::size_t line, std::size_t column, const std::string& message) {
    throw AsmError(kind, line, column, message);
}

std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == ';') break;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != ';') {
            if (line[i] == '"') {
                std::size_t open = i++;
                while (i < line.size() && line[i] != '"') {
                    if (line[i] == '\\') ++i;
                    ++i;
                }
                if (i >= line.size()) fail(ErrorKind::ParseError, line_no, open + 1, "unterminated string");
            }
            ++i;
        }
        tokens.push_back({line.substr(start, i - start), start + 1});
    }
    return tokens;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

/// Decodes a `"..."` token whose quotes are at both ends.
std::string unquote(std::string_view token, std::size_t line, std::size_t column) {
    if (token.size() < 2 || token.front() != '"' || token.back() != '"') {
        fail(ErrorKind::MalformedLiteral, line, column, "malformed quoted text " + std::string(token));
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < token.size(); ++i) {
        char c = token[i];
        if (c == '"') fail(ErrorKind::MalformedLiteral, line, column + i, "unexpected quote");
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i + 2 >= token.size()) fail(ErrorKind::MalformedLiteral, line, column + i, "dangling escape");
        char e = token[++i];
        switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '\\': out += '\\'; break;
        case '"': out += '"'; break;
        case 'x': {
            int hi = i + 1 < token.size() - 1 ? hex_digit(token[i + 1]) : -1;
            int lo = i + 2 < token.size() - 1 ? hex_digit(token[i + 2]) : -1;
            if (hi < 0 || lo < 0) fail(ErrorKind::MalformedLiteral, line, column + i, "bad \\x escape");
            out += static_cast<char>(hi * 16 + lo);
            i += 2;
            break;
        }
        default: fail(ErrorKind::MalformedLiteral, line, column + i, std::string("unknown escape \\") + e);
        }
    }
    return out;
}

/// A name written bare or quoted.
std::string name_of(const Token& token, std::size_t line) {
    if (!token.text.empty() && token.text.front() == '"') return unquote(token.text, line, token.column);
    if (token.text.find('"') != std::string_view::npos) {
        fail(ErrorKind::MalformedLiteral, line, token.column, "unexpected quote in " + std::string(token.text));
    }
    return std::string(token.text);
}

struct ParsedLiteral {
    std::optional<Literal> literal;
    std::string block_label;  // set instead of literal for @label
};

ParsedLiteral parse_literal_token(const Token& token, std::size_t line) {
    std::string_view t = token.text;
    auto suffix = [&]() -> std::string {
        Token rest{t.substr(1), token.column + 1};
        if (rest.text.empty()) fail(ErrorKind::MalformedLiteral, line, token.column, "empty literal " + std::string(t));
        return name_of(rest, line);
    };
    if (t.empty()) fail(ErrorKind::MalformedLiteral, line, token.column, "empty literal");
    char c = t.front();
    if (c == '#') return {Literal{bytecode::SymbolLiteral{suffix()}}, {}};
    if (c == '$') return {Literal{bytecode::GlobalLiteral{suffix()}}, {}};
    if (c == '@') return {std::nullopt, suffix()};
    if (c == '"') return {Literal{bytecode::StringLiteral{unquote(t, line, token.column)}}, {}};
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
        std::int64_t value = 0;
        auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec == std::errc::result_out_of_range) {
            fail(ErrorKind::MalformedLiteral, line, token.column, "integer out of range: " + std::string(t));
        }
        if (ec != std::errc() || end != t.data() + t.size()) {
            fail(ErrorKind::MalformedLiteral, line, token.column, "malformed integer " + std::string(t));
        }
        return {Literal{value}, {}};
    }
    fail(ErrorKind::MalformedLiteral, line, token.column, "expected a literal, got " + std::string(t));
}

std::optional<std::uint64_t> parse_unsigned(std::string_view text) {
    std::uint64_t value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) return std::nullopt;
    return value;
}

bool all_digits(std::string_view text) {
    return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct PendingBlockRef {
    std::size_t pool_index = 0;
    std::string label;
    std::size_t line = 0;
    std::size_t column = 0;
};

struct Body {
    std::shared_ptr<Method> method = std::make_shared<Method>();
    bool is_block = false;
    std::size_t line = 0;
    std::vector<std::optional<std::string>> block_labels;  // parallel to the literal pool
    std::vector<PendingBlockRef> refs;
    std::vector<std::pair<std::string, std::shared_ptr<const Method>>> children;
};

class Assembler {
public:
    explicit Assembler(std::string_view source) : source_(source) {}

    bytecode::ProgramImage run() {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= source_.size()) {
            std::size_t nl = source_.find('\n', pos);
            std::string_view line = source_.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++line_no;
            line_ = line_no;
            auto tokens = tokenize(line, line_no);
            if (!tokens.empty()) handle(tokens);
            if (nl == std::string_view::npos) break;
            pos = nl + 1;
        }
        if (!mode_) fail(ErrorKind::ParseError, line_, 1, "expected .mode directive");
        if (!bodies_.empty()) {
            fail(ErrorKind::ParseError, line_, 1,
                 "missing .end for " + std::string(bodies_.back().is_block ? ".block" : ".method") + " started on line " +
                     std::to_string(bodies_.back().line));
        }
        if (class_) fail(ErrorKind::ParseError, line_, 1, "missing .end for .class " + class_->name);
        if (!entry_seen_) fail(ErrorKind::ParseError, line_, 1, "expected .entry directive");
        image_.mode = *mode_;
        return std::move(image_);
    }

private:
    void handle(const std::vector<Token>& tokens) {
        const Token& head = tokens.front();
        if (!mode_ && head.text != ".mode") {
            fail(ErrorKind::ParseError, line_, head.column, "expected .mode directive before " + std::string(head.text));
        }
        if (head.text.front() == '.') {
            directive(tokens);
        } else {
            instruction(tokens);
        }
    }

    void expect_count(const std::vector<Token>& tokens, std::size_t min, std::size_t max, std::string_view usage) {
        if (tokens.size() < min) {
            fail(ErrorKind::ParseError, line_, tokens.back().column + tokens.back().text.size(),
                 "expected " + std::string(usage));
        }
        if (tokens.size() > max) {
            fail(ErrorKind::ParseError, line_, tokens[max].column,
                 "unexpected " + std::string(tokens[max].text) + ", expected " + std::string(usage));
        }
    }

    std::uint64_t number(const Token& token, std::uint64_t max, std::string_view what) {
        auto value = parse_unsigned(token.text);
        if (!value || *value > max) {
            fail(ErrorKind::ParseError, line_, token.column,
                 "expected " + std::string(what) + " (0-" + std::to_string(max) + "), got " + std::string(token.text));
        }
        return *value;
    }

    void directive(const std::vector<Token>& tokens) {
        const Token& head = tokens.front();
        std::string_view d = head.text;
        if (d == ".mode") {
            if (mode_) fail(ErrorKind::ParseError, line_, head.column, "duplicate .mode directive");
            expect_count(tokens, 2, 2, ".mode threads|actors");
            mode_ = bytecode::parse_mode(tokens[1].text);
            if (!mode_) {
                fail(ErrorKind::ParseError, line_, tokens[1].column,
                     "expected threads or actors, got " + std::string(tokens[1].text));
            }
        } else if (d == ".class") {
            if (class_ || !bodies_.empty()) fail(ErrorKind::ParseError, line_, head.column, ".class inside .class");
            expect_count(tokens, 2, 3, ".class Name [Superclass]");
            bytecode::CompiledClass cls;
            cls.name = name_of(tokens[1], line_);
            if (tokens.size() == 3) cls.superclass = name_of(tokens[2], line_);
            for (const auto& existing : image_.classes) {
                if (existing.name == cls.name) {
                    fail(ErrorKind::ParseError, line_, tokens[1].column, "duplicate class " + cls.name);
                }
            }
            class_ = std::move(cls);
        } else if (d == ".fields") {
            if (!class_ || !bodies_.empty()) {
                fail(ErrorKind::ParseError, line_, head.column, ".fields outside a class body");
            }
            for (std::size_t i = 1; i < tokens.size(); ++i) class_->fields.push_back(name_of(tokens[i], line_));
        } else if (d == ".method") {
            if (!class_ || !bodies_.empty()) {
                fail(ErrorKind::ParseError, line_, head.column, ".method outside a class body");
            }
            Body body = header(tokens, ".method selector [args N] [locals M]");
            for (const auto& m : class_->methods) {
                if (m.selector == body.method->selector) {
                    fail(ErrorKind::DuplicateSelector, line_, tokens[1].column,
                         "duplicate selector " + m.selector + " in class " + class_->name);
                }
            }
            bodies_.push_back(std::move(body));
        } else if (d == ".block") {
            if (bodies_.empty()) fail(ErrorKind::ParseError, line_, head.column, ".block outside a method");
            Body body = header(tokens, ".block label [args N] [locals M]");
            body.is_block = true;
            for (const auto& child : bodies_.back().children) {
                if (child.first == body.method->selector) {
                    fail(ErrorKind::ParseError, line_, tokens[1].column, "duplicate block label " + child.first);
                }
            }
            for (const auto& open : bodies_) {
                if (open.is_block && open.method->selector == body.method->selector) {
                    fail(ErrorKind::ParseError, line_, tokens[1].column,
                         "block label " + open.method->selector + " is already open");
                }
            }
            bodies_.push_back(std::move(body));
        } else if (d == ".literal") {
            if (bodies_.empty()) fail(ErrorKind::ParseError, line_, head.column, ".literal outside a method");
            expect_count(tokens, 2, 2, ".literal <literal>");
            append_literal(bodies_.back(), tokens[1]);
        } else if (d == ".byte") {
            if (bodies_.empty()) fail(ErrorKind::ParseError, line_, head.column, ".byte outside a method");
            expect_count(tokens, 2, 2, ".byte N");
            bodies_.back().method->code.push_back(static_cast<std::uint8_t>(number(tokens[1], 255, "a byte")));
        } else if (d == ".end") {
            expect_count(tokens, 1, 1, ".end");
            end();
        } else if (d == ".entry") {
            if (class_ || !bodies_.empty()) fail(ErrorKind::ParseError, line_, head.column, ".entry inside a class");
            if (entry_seen_) fail(ErrorKind::ParseError, line_, head.column, "duplicate .entry directive");
            expect_count(tokens, 3, 3, ".entry Class selector");
            image_.entry_class = name_of(tokens[1], line_);
            image_.entry_selector = name_of(tokens[2], line_);
            entry_seen_ = true;
        } else {
            fail(ErrorKind::ParseError, line_, head.column, "unknown directive " + std::string(d));
        }
    }

    Body header(const std::vector<Token>& tokens, std::string_view usage) {
        if (tokens.size() < 2) expect_count(tokens, 2, 2, usage);
        Body body;
        body.line = line_;
        body.method->selector = name_of(tokens[1], line_);
        body.method->num_args = static_cast<std::uint16_t>(bytecode::selector_arity(body.method->selector));
        bool seen_args = false;
        bool seen_locals = false;
        std::size_t i = 2;
        while (i < tokens.size()) {
            std::string_view key = tokens[i].text;
            bool* seen = key == "args" ? &seen_args : key == "locals" ? &seen_locals : nullptr;
            if (seen == nullptr || *seen) {
                fail(ErrorKind::ParseError, line_, tokens[i].column,
                     "unexpected " + std::string(key) + ", expected " + std::string(usage));
            }
            if (i + 1 >= tokens.size()) {
                fail(ErrorKind::ParseError, line_, tokens[i].column + key.size(), "expected a count after " + std::string(key));
            }
            auto value = static_cast<std::uint16_t>(number(tokens[i + 1], 65535, "a count"));
            (key == "args" ? body.method->num_args : body.method->num_locals) = value;
            *seen = true;
            i += 2;
        }
        return body;
    }

    void end() {
        if (!bodies_.empty()) {
            Body body = std::move(bodies_.back());
            bodies_.pop_back();
            finish(body);
            if (body.is_block) {
                bodies_.back().children.emplace_back(body.method->selector, body.method);
            } else {
                class_->methods.push_back(std::move(*body.method));
            }
            return;
        }
        if (class_) {
            image_.classes.push_back(std::move(*class_));
            class_.reset();
            return;
        }
        fail(ErrorKind::ParseError, line_, 1, ".end without an open .class, .method or .block");
    }

    void finish(Body& body) {
        for (const auto& ref : body.refs) {
            auto it = std::find_if(body.children.begin(), body.children.end(),
                                   [&](const auto& child) { return child.first == ref.label; });
            if (it == body.children.end()) {
                fail(ErrorKind::UndefinedLiteralLabel, ref.line, ref.column, "no block labelled " + ref.label);
            }
            body.method->literals[ref.pool_index] = bytecode::BlockLiteral{it->second};
        }
        for (const auto& child : body.children) {
            bool used = std::any_of(body.refs.begin(), body.refs.end(),
                                    [&](const PendingBlockRef& ref) { return ref.label == child.first; });
            if (!used) fail(ErrorKind::ParseError, line_, 1, "block " + child.first + " is never referenced");
        }
    }

    std::size_t add_to_pool(Body& body, ParsedLiteral parsed, const Token& token, bool reuse) {
        auto& pool = body.method->literals;
        if (reuse) {
            for (std::size_t i = 0; i < pool.size(); ++i) {
                bool same = parsed.literal ? (!body.block_labels[i] && pool[i] == *parsed.literal)
                                           : (body.block_labels[i] && *body.block_labels[i] == parsed.block_label);
                if (same) return i;
            }
        }
        if (pool.size() >= 256) fail(ErrorKind::ParseError, line_, token.column, "literal pool exceeds 256 entries");
        if (parsed.literal) {
            pool.push_back(*parsed.literal);
            body.block_labels.emplace_back();
        } else {
            pool.push_back(bytecode::BlockLiteral{});
            body.block_labels.emplace_back(parsed.block_label);
            body.refs.push_back({pool.size() - 1, parsed.block_label, line_, token.column});
        }
        return pool.size() - 1;
    }

    void append_literal(Body& body, const Token& token) {
        add_to_pool(body, parse_literal_token(token, line_), token, false);
    }

    void instruction(const std::vector<Token>& all) {
        std::size_t first = 0;
        Body* body = bodies_.empty() ? nullptr : &bodies_.back();
        if (all_digits(all.front().text)) {
            if (all.size() == 1) fail(ErrorKind::ParseError, line_, all.front().column, "expected a mnemonic after offset");
            if (body != nullptr) {
                auto offset = parse_unsigned(all.front().text);
                if (!offset || *offset != body->method->code.size()) {
                    fail(ErrorKind::ParseError, line_, all.front().column,
                         "offset " + std::string(all.front().text) + " does not match actual offset " +
                             std::to_string(body->method->code.size()));
                }
            }
            first = 1;
        }
        const Token& mnemonic = all[first];
        if (body == nullptr) {
            fail(ErrorKind::ParseError, line_, mnemonic.column,
                 "instruction " + std::string(mnemonic.text) + " outside a method");
        }
        std::string upper(mnemonic.text);
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        const bytecode::OpcodeInfo* info = bytecode::find_mnemonic(upper);
        if (info == nullptr) {
            fail(ErrorKind::UnknownMnemonic, line_, mnemonic.column, "unknown mnemonic " + std::string(mnemonic.text));
        }
        if (!bytecode::opcode_legal_in(info->opcode, *mode_)) {
            fail(ErrorKind::ModeViolation, line_, mnemonic.column,
                 std::string(info->mnemonic) + " is not legal in " + std::string(bytecode::mode_name(*mode_)) + " mode");
        }

        std::vector<Token> operands(all.begin() + static_cast<std::ptrdiff_t>(first) + 1, all.end());
        auto& code = body->method->code;
        code.push_back(static_cast<std::uint8_t>(info->opcode));
        switch (info->operands) {
        case bytecode::OperandKind::None:
            if (!operands.empty()) {
                fail(ErrorKind::ParseError, line_, operands[0].column,
                     std::string(info->mnemonic) + " takes no operands");
            }
            break;
        case bytecode::OperandKind::SlotAndContext: {
            if (operands.empty() || operands.size() > 2) {
                fail(ErrorKind::ParseError, line_,
                     operands.empty() ? mnemonic.column + mnemonic.text.size() : operands[2].column,
                     "expected index and context level");
            }
            code.push_back(static_cast<std::uint8_t>(number(operands[0], 255, "an index")));
            code.push_back(operands.size() == 2 ? static_cast<std::uint8_t>(number(operands[1], 255, "a context level"))
                                                : std::uint8_t{0});
            break;
        }
        case bytecode::OperandKind::Field:
            if (operands.size() != 1) {
                fail(ErrorKind::ParseError, line_,
                     operands.empty() ? mnemonic.column + mnemonic.text.size() : operands[1].column,
                     "expected a field index");
            }
            code.push_back(static_cast<std::uint8_t>(number(operands[0], 255, "a field index")));
            break;
        case bytecode::OperandKind::Literal: {
            if (operands.size() != 1) {
                fail(ErrorKind::ParseError, line_,
                     operands.empty() ? mnemonic.column + mnemonic.text.size() : operands[1].column,
                     "expected a literal");
            }
            const Token& tok = operands[0];
            std::size_t index = 0;
            if (!tok.text.empty() && tok.text.front() == '%') {
                Token rest{tok.text.substr(1), tok.column + 1};
                if (rest.text.empty()) fail(ErrorKind::MalformedLiteral, line_, tok.column, "expected %index");
                index = number(rest, 255, "a literal index");
            } else {
                index = add_to_pool(*body, parse_literal_token(tok, line_), tok, true);
            }
            code.push_back(static_cast<std::uint8_t>(index));
            break;
        }
        }
    }

    std::string_view source_;
    std::size_t line_ = 0;
    std::optional<bytecode::Mode> mode_;
    std::optional<bytecode::CompiledClass> class_;
    std::vector<Body> bodies_;
    bool entry_seen_ = false;
    bytecode::ProgramImage image_;
};

}  // namespace

bytecode::ProgramImage assemble(std::string_view source) { return Assembler(source).run(); }

Literal parse_literal(std::string_view token, std::span<const std::shared_ptr<const Method>> blocks) {
    ParsedLiteral parsed = parse_literal_token(Token{token, 1}, 1);
    if (parsed.literal) return *parsed.literal;
    for (const auto& block : blocks) {
        if (block && block->selector == parsed.block_label) return bytecode::BlockLiteral{block};
    }
    fail(ErrorKind::UndefinedLiteralLabel, 1, 1, "no block labelled " + parsed.block_label);
}

std::string quote(std::string_view text) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out = "\"";
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (u < 0x20 || u == 0x7f) {
                out += "\\x";
                out += kHex[u >> 4];
                out += kHex[u & 15];
            } else {
                out += c;
            }
        }
    }
    out += '"';
    return out;
}

}  // namespace cvm
