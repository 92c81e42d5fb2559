#include "featuredex/io_util.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace featuredex {

namespace fs = std::filesystem;

std::vector<uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Err::IoFailure, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    std::streamoff len = in.tellg();
    if (len < 0) throw Error(Err::IoFailure, "cannot stat " + path.string());
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> out(static_cast<size_t>(len));
    if (len > 0) in.read(reinterpret_cast<char*>(out.data()), len);
    if (!in) throw Error(Err::IoFailure, "short read on " + path.string());
    return out;
}

void write_file_atomic(const fs::path& path, const void* data, size_t size) {
    fs::path dir = path.parent_path();
    if (!dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error(Err::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    }
    // unique temp name in the destination directory so rename stays on one fs
    static std::atomic<uint64_t> counter{0};
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "." +
           std::to_string(static_cast<uint64_t>(
               std::chrono::steady_clock::now().time_since_epoch().count()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Err::IoFailure, "cannot open " + tmp.string() + " for write");
        if (size > 0) out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(Err::IoFailure, "write failed on " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(Err::IoFailure, "cannot rename into " + path.string() + ": " + ec.message());
    }
}

void write_file_atomic(const fs::path& path, const std::vector<uint8_t>& bytes) {
    write_file_atomic(path, bytes.data(), bytes.size());
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

}  // namespace featuredex
