#include "btnet/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "serialization code assumes a little-endian host");

namespace btnet {

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw std::runtime_error("truncated tensor stream");
    return v;
}

void write_tensor(std::ostream& os, const DenseTensor& t) {
    write_u32(os, static_cast<std::uint32_t>(t.order()));
    for (std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

DenseTensor read_tensor(std::istream& is) {
    const std::uint32_t order = read_u32(is);
    Shape shape(order);
    for (auto& d : shape) d = read_u32(is);
    std::vector<double> data(shape_size(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated tensor stream");
    return DenseTensor(std::move(shape), std::move(data));
}

void write_tensor_file(const std::string& path, const DenseTensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_tensor(f, t);
}

DenseTensor read_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return read_tensor(f);
}

}  // namespace btnet
