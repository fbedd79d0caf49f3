#include "rom/binary_io.hpp"
#include "rom/error.hpp"
#include "rom/nn.hpp"

namespace rom::nn {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::uint8_t code(ModelKind k) { return k == ModelKind::Lstm ? 0 : 1; }
std::uint8_t code(Activation a) { return static_cast<std::uint8_t>(a); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec, const Parameters& params) {
    if (params.values.size() != count_parameters(spec)) throw ShapeError("parameters do not match spec");
    io::ByteWriter w;
    w.magic("ROMW");
    w.u32(kCheckpointVersion);
    w.u8(code(spec.kind));
    w.u64(spec.modes);
    w.u64(spec.horizon);
    w.u64(spec.window);
    w.u64(spec.units);
    w.u8(code(spec.hidden));
    w.u8(code(spec.output));
    w.u64(params.values.size());
    w.f64s(params.values);
    io::write_file(path, w.buffer());
}

std::pair<NetworkSpec, Parameters> load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    const std::string ctx = path.string();
    io::ByteReader r(bytes, ctx);
    r.expect_magic("ROMW");
    if (r.u32() != kCheckpointVersion) throw FormatError(ctx + ": unsupported checkpoint version");
    NetworkSpec spec;
    const auto kind = r.u8();
    if (kind > 1) throw CorruptError(ctx + ": invalid model kind");
    spec.kind = kind == 0 ? ModelKind::Lstm : ModelKind::Cnn;
    spec.modes = r.u64();
    spec.horizon = r.u64();
    spec.window = r.u64();
    spec.units = r.u64();
    const auto hidden = r.u8();
    const auto output = r.u8();
    if (hidden > 3 || output > 3) throw CorruptError(ctx + ": invalid activation code");
    spec.hidden = static_cast<Activation>(hidden);
    spec.output = static_cast<Activation>(output);
    const auto count = r.u64();
    if (count != count_parameters(spec)) {
        throw CorruptError(ctx + ": parameter count " + std::to_string(count) + " does not match " +
                           describe(spec));
    }
    if (r.remaining() != 8 * count) throw CorruptError(ctx + ": payload size mismatch");
    Parameters params(spec);
    params.values = r.f64s(count);
    return {spec, std::move(params)};
}

Parameters load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected) {
    auto [spec, params] = load_checkpoint(path);
    if (!(spec == expected)) {
        throw MismatchError(path.string() + ": checkpoint holds " + describe(spec) + ", expected " +
                            describe(expected));
    }
    return std::move(params);
}

}  // namespace rom::nn
