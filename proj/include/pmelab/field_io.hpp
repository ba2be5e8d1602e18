#pragma once

// Field files.
//
// Binary layout (all little-endian):
//   char[4]  magic "PMEF"
//   u32      version (1)
//   u32      dimension
//   u32      cells along x, u32 cells along y (2 in 1D)
//   f64      extent x, f64 extent y (1.0 in 1D)
//   u32      number of mask runs, then that many u32 run lengths; runs
//            alternate false/true starting with false over the inner lattice
//            in x-fastest order
//   u64      number of values, then that many f64 (interior nodes, same order)

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pmelab/errors.hpp"
#include "pmelab/grid.hpp"

namespace pmelab {

namespace detail {

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw ContractViolation("field file: truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline std::vector<std::uint32_t> mask_runs(const std::vector<std::uint8_t>& mask) {
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t len = 0;
    for (std::uint8_t b : mask) {
        const std::uint8_t v = b ? 1 : 0;
        if (v != current) {
            runs.push_back(len);
            len = 0;
            current = v;
        }
        ++len;
    }
    runs.push_back(len);
    return runs;
}

inline void write_field(std::ostream& os, const Field& f) {
    const Domain& d = f.domain();
    os.write("PMEF", 4);
    detail::put_le<std::uint32_t>(os, 1);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.dimension()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.resolution()[0]));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.resolution()[1]));
    detail::put_le<double>(os, d.extent()[0]);
    detail::put_le<double>(os, d.extent()[1]);
    const auto runs = mask_runs(d.mask());
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(runs.size()));
    for (auto r : runs) detail::put_le<std::uint32_t>(os, r);
    detail::put_le<std::uint64_t>(os, f.size());
    for (double v : f.values()) detail::put_le<double>(os, v);
}

inline Field read_field(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "PMEF", 4) != 0)
        throw ContractViolation("field file: bad magic");
    if (detail::get_le<std::uint32_t>(is) != 1) throw ContractViolation("field file: unsupported version");
    const int dim = static_cast<int>(detail::get_le<std::uint32_t>(is));
    const int nx = static_cast<int>(detail::get_le<std::uint32_t>(is));
    const int ny = static_cast<int>(detail::get_le<std::uint32_t>(is));
    const double lx = detail::get_le<double>(is);
    const double ly = detail::get_le<double>(is);
    const auto nruns = detail::get_le<std::uint32_t>(is);
    std::vector<std::uint8_t> mask;
    for (std::uint32_t r = 0; r < nruns; ++r) {
        const auto len = detail::get_le<std::uint32_t>(is);
        mask.insert(mask.end(), len, static_cast<std::uint8_t>(r % 2));
    }
    DomainHandle d;
    if (dim == 1) {
        d = Domain::interval(lx, nx);
        if (mask.size() != d->mask().size()) throw ContractViolation("field file: mask size mismatch");
        if (mask != d->mask()) d = d->with_mask(std::move(mask));
    } else {
        d = Domain::masked(lx, ly, nx, ny, std::move(mask));
    }
    const auto count = detail::get_le<std::uint64_t>(is);
    if (count != d->size()) throw ContractViolation("field file: value count mismatch");
    std::vector<double> v(count);
    for (auto& x : v) x = detail::get_le<double>(is);
    return Field(d, std::move(v));
}

inline void save_field(const std::string& path, const Field& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ContractViolation("cannot open " + path + " for writing");
    write_field(os, f);
}

inline Field load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractViolation("cannot open " + path);
    return read_field(is);
}

/// "x,value" rows for a 1D field, boundary nodes included.
inline std::string field_csv_1d(const Field& f) {
    if (f.domain().dimension() != 1) throw ContractViolation("field_csv_1d: field is not 1D");
    std::ostringstream os;
    os << "x,value\n";
    const double h = f.domain().spacing()[0];
    const int n = f.domain().lattice_nx();
    os << "0,0\n";
    for (int i = 0; i < n; ++i) {
        const int k = f.domain().index_of(i, 0);
        os << detail::format_double((i + 1) * h) << ',' << detail::format_double(k >= 0 ? f[static_cast<std::size_t>(k)] : 0.0) << '\n';
    }
    os << detail::format_double(f.domain().extent()[0]) << ",0\n";
    return os.str();
}

}  // namespace pmelab
