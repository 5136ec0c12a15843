#include "cvm/image.hpp"

#include "cvm/error.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <string>

namespace cvm::bytecode {

namespace {

constexpr std::uint8_t kTagInteger = 0;
constexpr std::uint8_t kTagSymbol = 1;
constexpr std::uint8_t kTagString = 2;
constexpr std::uint8_t kTagGlobal = 3;
constexpr std::uint8_t kTagBlock = 4;

// Nested block templates deeper than this are treated as corruption.
constexpr int kMaxBlockNesting = 64;

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v), 8); }

    void string(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }

    void method(const Method& m) {
        string(m.selector);
        u16(m.num_args);
        u16(m.num_locals);
        u32(static_cast<std::uint32_t>(m.literals.size()));
        for (const Literal& lit : m.literals) literal(lit);
        u32(static_cast<std::uint32_t>(m.code.size()));
        out_.insert(out_.end(), m.code.begin(), m.code.end());
    }

    void literal(const Literal& lit) {
        std::visit(
            [this](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, std::int64_t>) {
                    u8(kTagInteger);
                    i64(v);
                } else if constexpr (std::is_same_v<T, SymbolLiteral>) {
                    u8(kTagSymbol);
                    string(v.name);
                } else if constexpr (std::is_same_v<T, StringLiteral>) {
                    u8(kTagString);
                    string(v.text);
                } else if constexpr (std::is_same_v<T, GlobalLiteral>) {
                    u8(kTagGlobal);
                    string(v.name);
                } else {
                    u8(kTagBlock);
                    method(*v.method);
                }
            },
            lit);
    }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    void put_le(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

    std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(get_le(1, what)); }
    std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get_le(2, what)); }
    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get_le(4, what)); }
    std::int64_t i64(const char* what) { return static_cast<std::int64_t>(get_le(8, what)); }

    std::string string(const char* what) {
        const std::size_t at = pos_;
        const std::uint32_t len = u32(what);
        require(len, at, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }

    std::vector<std::uint8_t> raw(std::uint32_t len, const char* what) {
        require(len, pos_, what);
        std::vector<std::uint8_t> v(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                    bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
        pos_ += len;
        return v;
    }

    Method method(int depth) {
        if (depth > kMaxBlockNesting) {
            throw DecodeError(ErrorKind::CorruptSection, pos_, "block templates nested too deeply");
        }
        Method m;
        m.selector = string("method selector");
        m.num_args = u16("argument count");
        m.num_locals = u16("local count");
        const std::uint32_t nlit = u32("literal count");
        for (std::uint32_t i = 0; i < nlit; ++i) m.literals.push_back(literal(depth));
        const std::uint32_t len = u32("code length");
        m.code = raw(len, "code bytes");
        return m;
    }

    Literal literal(int depth) {
        const std::size_t at = pos_;
        switch (u8("literal tag")) {
        case kTagInteger: return i64("integer literal");
        case kTagSymbol: return SymbolLiteral{string("symbol literal")};
        case kTagString: return StringLiteral{string("string literal")};
        case kTagGlobal: return GlobalLiteral{string("global literal")};
        case kTagBlock: return BlockLiteral{std::make_shared<const Method>(method(depth + 1))};
        default: throw DecodeError(ErrorKind::CorruptSection, at, "unknown literal tag");
        }
    }

private:
    void require(std::size_t n, std::size_t at, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw DecodeError(ErrorKind::CorruptSection, at, std::string("truncated ") + what);
        }
    }

    std::uint64_t get_le(int width, const char* what) {
        require(static_cast<std::size_t>(width), pos_, what);
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> write_image(const ProgramImage& image) {
    Writer w;
    for (char c : kImageMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(image.version);
    w.u8(static_cast<std::uint8_t>(image.mode));
    w.u32(static_cast<std::uint32_t>(image.classes.size()));
    for (const CompiledClass& cls : image.classes) {
        w.string(cls.name);
        w.string(cls.superclass);
        w.u32(static_cast<std::uint32_t>(cls.fields.size()));
        for (const auto& f : cls.fields) w.string(f);
        w.u32(static_cast<std::uint32_t>(cls.methods.size()));
        for (const Method& m : cls.methods) w.method(m);
    }
    w.string(image.entry_class);
    w.string(image.entry_selector);
    return w.take();
}

ProgramImage read_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kImageMagic.size() ||
        !std::equal(kImageMagic.begin(), kImageMagic.end(), bytes.begin(),
                    [](char c, std::uint8_t b) { return static_cast<std::uint8_t>(c) == b; })) {
        throw DecodeError(ErrorKind::BadMagic, 0, "image does not start with \"CVMI\"");
    }
    Reader r(bytes, kImageMagic.size());
    ProgramImage image;
    image.version = r.u32("version");
    if (image.version != kImageVersion) {
        throw DecodeError(ErrorKind::UnsupportedVersion, 4,
                          "image version " + std::to_string(image.version) + " is not supported");
    }
    const std::size_t mode_at = r.offset();
    const std::uint8_t mode = r.u8("mode");
    if (mode > static_cast<std::uint8_t>(Mode::Actors)) {
        throw DecodeError(ErrorKind::CorruptSection, mode_at, "unknown mode byte");
    }
    image.mode = static_cast<Mode>(mode);
    const std::uint32_t nclasses = r.u32("class count");
    for (std::uint32_t i = 0; i < nclasses; ++i) {
        CompiledClass cls;
        cls.name = r.string("class name");
        cls.superclass = r.string("superclass name");
        const std::uint32_t nfields = r.u32("field count");
        for (std::uint32_t f = 0; f < nfields; ++f) cls.fields.push_back(r.string("field name"));
        const std::uint32_t nmethods = r.u32("method count");
        for (std::uint32_t m = 0; m < nmethods; ++m) cls.methods.push_back(r.method(0));
        image.classes.push_back(std::move(cls));
    }
    image.entry_class = r.string("entry class");
    image.entry_selector = r.string("entry selector");
    if (!r.at_end()) throw DecodeError(ErrorKind::CorruptSection, r.offset(), "trailing bytes after image");
    return image;
}

ProgramImage load_image_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_image(bytes);
}

void save_image_file(const std::filesystem::path& path, const ProgramImage& image) {
    const auto bytes = write_image(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace cvm::bytecode
