#include "kseg/archive.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kseg {

namespace {

constexpr char kMagic[8] = {'K', 'S', 'A', 'R', 'C', '0', '0', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("archive: truncated file");
    return v;
}

}  // namespace

ArchiveEntry ArchiveEntry::from_tensor(const Tensor& t) {
    ArchiveEntry e;
    e.dtype = DType::F64;
    e.shape = t.shape;
    e.f64 = t.data;
    return e;
}

ArchiveEntry ArchiveEntry::from_bytes(const std::vector<uint8_t>& b) {
    ArchiveEntry e;
    e.dtype = DType::U8;
    e.shape = {static_cast<int64_t>(b.size())};
    e.u8 = b;
    return e;
}

ArchiveEntry ArchiveEntry::from_string(const std::string& s) {
    return from_bytes(std::vector<uint8_t>(s.begin(), s.end()));
}

Tensor ArchiveEntry::to_tensor() const {
    if (dtype != DType::F64) throw std::runtime_error("archive: entry is not f64");
    Tensor t;
    t.shape = shape;
    t.data = f64;
    if (t.numel() != Tensor::numel_of(shape))
        throw std::runtime_error("archive: corrupt entry payload size");
    return t;
}

std::string ArchiveEntry::to_string() const {
    if (dtype != DType::U8) throw std::runtime_error("archive: entry is not bytes");
    return std::string(u8.begin(), u8.end());
}

void write_archive(const std::string& path, const Archive& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("archive: cannot open for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    put<uint32_t>(os, static_cast<uint32_t>(a.size()));
    for (const auto& [name, e] : a) {
        put<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint8_t>(os, static_cast<uint8_t>(e.dtype));
        put<uint32_t>(os, static_cast<uint32_t>(e.shape.size()));
        for (int64_t d : e.shape) put<int64_t>(os, d);
        if (e.dtype == ArchiveEntry::DType::F64) {
            os.write(reinterpret_cast<const char*>(e.f64.data()),
                     static_cast<std::streamsize>(e.f64.size() * sizeof(double)));
        } else {
            os.write(reinterpret_cast<const char*>(e.u8.data()),
                     static_cast<std::streamsize>(e.u8.size()));
        }
    }
    if (!os) throw std::runtime_error("archive: write failed: " + path);
}

Archive read_archive(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("archive: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("archive: bad magic in " + path);
    auto count = get<uint32_t>(is);
    Archive a;
    for (uint32_t i = 0; i < count; ++i) {
        auto name_len = get<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        ArchiveEntry e;
        e.dtype = static_cast<ArchiveEntry::DType>(get<uint8_t>(is));
        auto ndim = get<uint32_t>(is);
        e.shape.resize(ndim);
        for (uint32_t d = 0; d < ndim; ++d) e.shape[d] = get<int64_t>(is);
        int64_t n = Tensor::numel_of(e.shape);
        if (e.dtype == ArchiveEntry::DType::F64) {
            e.f64.resize(static_cast<size_t>(n));
            is.read(reinterpret_cast<char*>(e.f64.data()),
                    static_cast<std::streamsize>(n * static_cast<int64_t>(sizeof(double))));
        } else if (e.dtype == ArchiveEntry::DType::U8) {
            e.u8.resize(static_cast<size_t>(n));
            is.read(reinterpret_cast<char*>(e.u8.data()), static_cast<std::streamsize>(n));
        } else {
            throw std::runtime_error("archive: unknown dtype in " + path);
        }
        if (!is) throw std::runtime_error("archive: truncated entry '" + name + "' in " + path);
        a.emplace(std::move(name), std::move(e));
    }
    return a;
}

void write_keyvalue(const std::string& path, const KeyValueMap& kv) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

KeyValueMap read_keyvalue(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    KeyValueMap kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t");
            size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace kseg
