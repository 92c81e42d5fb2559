#include "featuredex/stl.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"

namespace featuredex {

namespace {

constexpr size_t kBinaryHeader = 80;
constexpr size_t kTriangleRecord = 50;

void check_finite(const Vec3& v, const char* what) {
    if (!v.finite())
        throw Error(Err::NonFinite, std::string("non-finite ") + what + " coordinate");
}

// Stored normals are kept as zero or unit length.
Vec3 sanitize_normal(Vec3 n) {
    double len = n.norm();
    if (len == 0.0) return {0, 0, 0};
    return n * (1.0 / len);
}

TriangleMesh parse_binary(std::span<const uint8_t> bytes) {
    ByteReader r(bytes.data(), bytes.size(), "binary STL");
    r.take(kBinaryHeader);
    uint64_t count = r.u32();
    uint64_t expected = 84 + kTriangleRecord * count;
    if (bytes.size() != expected)
        throw Error(Err::Truncated, "binary STL length " + std::to_string(bytes.size()) +
                                        " != expected " + std::to_string(expected) +
                                        " for " + std::to_string(count) + " triangles");
    TriangleMesh mesh;
    mesh.triangles.reserve(count);
    mesh.attributes.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        Triangle t;
        Vec3* fields[4] = {&t.normal, &t.v0, &t.v1, &t.v2};
        for (Vec3* f : fields) {
            f->x = r.f32();
            f->y = r.f32();
            f->z = r.f32();
        }
        check_finite(t.normal, "normal");
        check_finite(t.v0, "vertex");
        check_finite(t.v1, "vertex");
        check_finite(t.v2, "vertex");
        t.normal = sanitize_normal(t.normal);
        mesh.attributes.push_back(r.u16());
        mesh.triangles.push_back(t);
    }
    return mesh;
}

// Whitespace-delimited tokenizer with line tracking for diagnostics.
class AsciiScanner {
public:
    explicit AsciiScanner(std::span<const uint8_t> bytes)
        : text_(reinterpret_cast<const char*>(bytes.data())), size_(bytes.size()) {}

    // next token, empty when input is exhausted
    std::string_view next() {
        while (pos_ < size_ && is_space(text_[pos_])) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        size_t start = pos_;
        while (pos_ < size_ && !is_space(text_[pos_])) ++pos_;
        return {text_ + start, pos_ - start};
    }

    // rest of the current line, trimmed (solid/endsolid names)
    std::string rest_of_line() {
        size_t start = pos_;
        while (pos_ < size_ && text_[pos_] != '\n') ++pos_;
        size_t end = pos_;
        if (pos_ < size_) {
            ++line_;
            ++pos_;
        }
        while (start < end && is_space(text_[start])) ++start;
        while (end > start && is_space(text_[end - 1])) --end;
        return std::string(text_ + start, end - start);
    }

    int line() const { return line_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(Err::Malformed,
                    "ASCII STL line " + std::to_string(line_) + ": " + msg);
    }

    void expect(std::string_view keyword) {
        std::string_view tok = next();
        if (tok != keyword)
            fail("expected '" + std::string(keyword) + "', got '" + std::string(tok) + "'");
    }

    double number(const char* what) {
        std::string_view tok = next();
        if (tok.empty()) fail(std::string("missing ") + what);
        std::string buf(tok);
        char* end = nullptr;
        double v = std::strtod(buf.c_str(), &end);
        if (end != buf.c_str() + buf.size())
            fail("bad " + std::string(what) + " '" + buf + "'");
        if (!std::isfinite(v))
            throw Error(Err::NonFinite, "ASCII STL line " + std::to_string(line_) +
                                            ": non-finite " + what);
        return v;
    }

private:
    static bool is_space(char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
    }

    const char* text_;
    size_t size_;
    size_t pos_ = 0;
    int line_ = 1;
};

TriangleMesh parse_ascii(std::span<const uint8_t> bytes) {
    AsciiScanner s(bytes);
    s.expect("solid");
    TriangleMesh mesh;
    mesh.source_name = s.rest_of_line();
    for (;;) {
        std::string_view tok = s.next();
        if (tok == "facet") {
            s.expect("normal");
            Triangle t;
            t.normal.x = s.number("normal x");
            t.normal.y = s.number("normal y");
            t.normal.z = s.number("normal z");
            s.expect("outer");
            s.expect("loop");
            Vec3* verts[3] = {&t.v0, &t.v1, &t.v2};
            for (Vec3* v : verts) {
                s.expect("vertex");
                v->x = s.number("vertex x");
                v->y = s.number("vertex y");
                v->z = s.number("vertex z");
            }
            s.expect("endloop");
            s.expect("endfacet");
            t.normal = sanitize_normal(t.normal);
            mesh.triangles.push_back(t);
            mesh.attributes.push_back(0);
        } else if (tok == "endsolid") {
            s.rest_of_line();
            std::string_view trailing = s.next();
            if (!trailing.empty())
                s.fail("unexpected content after endsolid: '" + std::string(trailing) + "'");
            return mesh;
        } else if (tok.empty()) {
            s.fail("unexpected end of input, missing endsolid");
        } else {
            s.fail("expected 'facet' or 'endsolid', got '" + std::string(tok) + "'");
        }
    }
}

void append_f32(ByteWriter& w, const Vec3& v) {
    w.f32(static_cast<float>(v.x));
    w.f32(static_cast<float>(v.y));
    w.f32(static_cast<float>(v.z));
}

std::vector<uint8_t> write_binary(const TriangleMesh& mesh) {
    ByteWriter w;
    char header[kBinaryHeader] = {0};
    std::snprintf(header, sizeof header, "featuredex binary STL; %zu triangles",
                  mesh.triangles.size());
    w.bytes(header, kBinaryHeader);
    w.u32(static_cast<uint32_t>(mesh.triangles.size()));
    for (const Triangle& t : mesh.triangles) {
        append_f32(w, t.winding_normal());
        append_f32(w, t.v0);
        append_f32(w, t.v1);
        append_f32(w, t.v2);
        w.u16(0);
    }
    return w.take();
}

void append_vec_ascii(std::string& out, const char* keyword, const Vec3& v) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s %.8e %.8e %.8e\n", keyword,
                  static_cast<double>(static_cast<float>(v.x)),
                  static_cast<double>(static_cast<float>(v.y)),
                  static_cast<double>(static_cast<float>(v.z)));
    out += buf;
}

std::vector<uint8_t> write_ascii(const TriangleMesh& mesh) {
    std::string name = mesh.source_name.empty() ? "mesh" : mesh.source_name;
    for (char& c : name)
        if (c == '\n' || c == '\r') c = ' ';
    std::string out = "solid " + name + "\n";
    for (const Triangle& t : mesh.triangles) {
        out += "  ";
        append_vec_ascii(out, "facet normal", t.winding_normal());
        out += "    outer loop\n";
        const Vec3* verts[3] = {&t.v0, &t.v1, &t.v2};
        for (const Vec3* v : verts) {
            out += "      ";
            append_vec_ascii(out, "vertex", *v);
        }
        out += "    endloop\n  endfacet\n";
    }
    out += "endsolid " + name + "\n";
    return {out.begin(), out.end()};
}

}  // namespace

TriangleMesh parse_stl(std::span<const uint8_t> bytes) {
    if (bytes.empty()) throw Error(Err::Malformed, "empty STL input");
    bool solid_prefix =
        bytes.size() >= 5 && std::memcmp(bytes.data(), "solid", 5) == 0;
    if (!solid_prefix) return parse_binary(bytes);
    try {
        return parse_ascii(bytes);
    } catch (const Error& ascii_err) {
        if (ascii_err.kind() != Err::Malformed) throw;
        // binary files often carry "solid" in the 80-byte header
        try {
            return parse_binary(bytes);
        } catch (const Error&) {
            throw ascii_err;
        }
    }
}

std::vector<uint8_t> write_stl(const TriangleMesh& mesh, StlFormat format) {
    if (mesh.triangles.empty())
        throw Error(Err::Empty, "refusing to write STL with zero triangles");
    for (const Triangle& t : mesh.triangles)
        if (!t.v0.finite() || !t.v1.finite() || !t.v2.finite())
            throw Error(Err::NonFinite, "refusing to write non-finite vertex");
    return format == StlFormat::Binary ? write_binary(mesh) : write_ascii(mesh);
}

TriangleMesh load_stl(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file(path);
    TriangleMesh mesh = parse_stl(bytes);
    if (mesh.source_name.empty()) mesh.source_name = path.stem().string();
    return mesh;
}

void save_stl(const TriangleMesh& mesh, const std::filesystem::path& path, StlFormat format) {
    write_file_atomic(path, write_stl(mesh, format));
}

}  // namespace featuredex
