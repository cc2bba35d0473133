#include "btnet/mnist.hpp"

#include <fstream>

namespace btnet::mnist {

namespace {
constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& is, std::size_t& offset) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    if (!is) throw FormatError("truncated header", offset);
    offset += 4;
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be_u32(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(buf), 4);
}
}  // namespace

Dataset load(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open " + images_path);
    std::size_t offset = 0;
    const std::uint32_t magic = read_be_u32(img, offset);
    if (magic != kImageMagic)
        throw FormatError("bad image magic number in " + images_path, offset - 4);
    const std::uint32_t count = read_be_u32(img, offset);
    const std::uint32_t rows = read_be_u32(img, offset);
    const std::uint32_t cols = read_be_u32(img, offset);

    std::vector<unsigned char> pixels(std::size_t(count) * rows * cols);
    img.read(reinterpret_cast<char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
    if (static_cast<std::size_t>(img.gcount()) != pixels.size())
        throw FormatError("truncated image payload in " + images_path,
                          offset + static_cast<std::size_t>(img.gcount()));

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open " + labels_path);
    std::size_t loffset = 0;
    const std::uint32_t lmagic = read_be_u32(lab, loffset);
    if (lmagic != kLabelMagic)
        throw FormatError("bad label magic number in " + labels_path, loffset - 4);
    const std::uint32_t lcount = read_be_u32(lab, loffset);
    if (lcount != count)
        throw FormatError("label count " + std::to_string(lcount) +
                              " does not match image count " + std::to_string(count),
                          loffset - 4);
    std::vector<unsigned char> raw_labels(lcount);
    lab.read(reinterpret_cast<char*>(raw_labels.data()),
             static_cast<std::streamsize>(raw_labels.size()));
    if (static_cast<std::size_t>(lab.gcount()) != raw_labels.size())
        throw FormatError("truncated label payload in " + labels_path,
                          loffset + static_cast<std::size_t>(lab.gcount()));

    Dataset ds;
    ds.images = DenseTensor({count, 1, rows, cols});
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.images[i] = static_cast<double>(pixels[i]) / 255.0;
    ds.labels.reserve(lcount);
    for (unsigned char l : raw_labels) {
        if (l > 9)
            throw FormatError("label value " + std::to_string(int(l)) + " out of range",
                              loffset);
        ds.labels.push_back(static_cast<int>(l));
    }
    return ds;
}

void save_idx(const std::string& images_path, const std::string& labels_path,
              const std::vector<std::uint8_t>& pixels, std::size_t rows, std::size_t cols,
              const std::vector<std::uint8_t>& labels) {
    if (pixels.size() != labels.size() * rows * cols)
        throw std::invalid_argument("pixel buffer does not match label count");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open " + images_path + " for writing");
    write_be_u32(img, kImageMagic);
    write_be_u32(img, static_cast<std::uint32_t>(labels.size()));
    write_be_u32(img, static_cast<std::uint32_t>(rows));
    write_be_u32(img, static_cast<std::uint32_t>(cols));
    img.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open " + labels_path + " for writing");
    write_be_u32(lab, kLabelMagic);
    write_be_u32(lab, static_cast<std::uint32_t>(labels.size()));
    lab.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

}  // namespace btnet::mnist
