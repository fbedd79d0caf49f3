#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "rom/binary_io.hpp"
#include "rom/data.hpp"
#include "rom/error.hpp"

namespace rom::data {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kStatsVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_dataset(const SnapshotTensor& tensor) {
    io::ByteWriter w;
    w.magic("ROMF");
    w.u32(kDatasetVersion);
    w.u64(tensor.n_vars());
    w.u64(tensor.nx());
    w.u64(tensor.ny());
    w.u64(tensor.n_times());
    w.f64(tensor.dt());
    for (std::size_t v = 0; v < tensor.n_vars(); ++v) {
        const auto& name = tensor.var_names()[v];
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u8(tensor.is_species()[v] ? 1 : 0);
    }
    w.f64s(tensor.values());
    return w.buffer();
}

SnapshotTensor decode_dataset(std::span<const std::uint8_t> bytes, const std::string& context) {
    io::ByteReader r(bytes, context);
    r.expect_magic("ROMF");
    const auto version = r.u32();
    if (version != kDatasetVersion) {
        throw FormatError(context + ": unsupported dataset version " + std::to_string(version));
    }
    const std::uint64_t dims[4] = {r.u64(), r.u64(), r.u64(), r.u64()};
    for (auto d : dims) {
        if (d == 0) throw CorruptError(context + ": zero dimension in header");
    }
    const double dt = r.f64();
    const auto count = io::checked_product(dims, context);
    if (count > std::numeric_limits<std::uint64_t>::max() / 8) {
        throw CorruptError(context + ": dimension overflow");
    }
    std::vector<std::string> names;
    std::vector<bool> species;
    for (std::uint64_t v = 0; v < dims[0]; ++v) {
        const auto len = r.u32();
        names.push_back(r.bytes(len));
        const auto flag = r.u8();
        if (flag > 1) throw CorruptError(context + ": invalid species flag");
        species.push_back(flag == 1);
    }
    if (r.remaining() != count * 8) {
        throw CorruptError(context + ": header dims give " + std::to_string(count) +
                           " values but payload holds " + std::to_string(r.remaining()) + " bytes");
    }
    auto values = r.f64s(static_cast<std::size_t>(count));
    Layout layout{static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                  static_cast<std::size_t>(dims[2])};
    return SnapshotTensor(layout, static_cast<std::size_t>(dims[3]), std::move(values),
                          std::move(names), std::move(species), dt);
}

void write_dataset(const std::filesystem::path& path, const SnapshotTensor& tensor) {
    io::write_file(path, encode_dataset(tensor));
}

SnapshotTensor read_dataset(const std::filesystem::path& path) {
    return decode_dataset(io::read_file(path), path.string());
}

void write_csv_slice(const std::filesystem::path& path, const SnapshotTensor& tensor,
                     std::size_t variable, std::size_t time) {
    if (variable >= tensor.n_vars() || time >= tensor.n_times()) {
        throw InvalidArgument("csv slice index out of range");
    }
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t j = 0; j < tensor.ny(); ++j) {
        for (std::size_t i = 0; i < tensor.nx(); ++i) {
            if (i) os << ',';
            os << tensor.at(variable, i, j, time);
        }
        os << '\n';
    }
    io::write_text(path, os.str());
}

std::size_t export_variable_csv(const std::filesystem::path& dir, const SnapshotTensor& tensor,
                                std::size_t variable) {
    if (variable >= tensor.n_vars()) throw InvalidArgument("variable index out of range");
    std::filesystem::create_directories(dir);
    for (std::size_t k = 0; k < tensor.n_times(); ++k) {
        write_csv_slice(dir / (tensor.var_names()[variable] + "_t" + std::to_string(k) + ".csv"),
                        tensor, variable, k);
    }
    return tensor.n_times();
}

void write_scaling_stats(const std::filesystem::path& path, const ScalingStats& stats) {
    io::ByteWriter w;
    w.magic("ROMS");
    w.u32(kStatsVersion);
    w.u64(stats.layout.n_vars);
    w.u64(stats.layout.nx);
    w.u64(stats.layout.ny);
    w.f64(stats.epsilon);
    w.f64s(stats.sigma);
    w.f64s(std::span(stats.mean.data(), static_cast<std::size_t>(stats.mean.size())));
    io::write_file(path, w.buffer());
}

ScalingStats read_scaling_stats(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader r(bytes, path.string());
    r.expect_magic("ROMS");
    if (r.u32() != kStatsVersion) throw FormatError(path.string() + ": unsupported stats version");
    ScalingStats stats;
    const std::uint64_t dims[3] = {r.u64(), r.u64(), r.u64()};
    const auto rows = io::checked_product(dims, path.string());
    stats.layout = Layout{static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                          static_cast<std::size_t>(dims[2])};
    stats.epsilon = r.f64();
    stats.sigma = r.f64s(stats.layout.n_vars);
    if (r.remaining() != rows * 8) throw CorruptError(path.string() + ": stats payload size mismatch");
    const auto mean = r.f64s(static_cast<std::size_t>(rows));
    stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(rows));
    return stats;
}

}  // namespace rom::data
