#include "dnfs/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dnfs {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'F', 'S'};

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("checkpoint: " + path.string() + ": " + what);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8),
                                (unsigned char)(v >> 16), (unsigned char)(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, std::uint32_t(v));
    put_u32(out, std::uint32_t(v >> 32));
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, std::uint32_t(s.size()));
    out.write(s.data(), std::streamsize(s.size()));
}

void put_array(std::ostream& out, const Checkpoint::Array& a) {
    put_str(out, a.name);
    put_u32(out, std::uint32_t(a.dims.size()));
    std::size_t numel = 1;
    for (std::uint32_t d : a.dims) {
        put_u32(out, d);
        numel *= d;
    }
    if (numel != a.values.size())
        throw std::logic_error("checkpoint: array '" + a.name + "' dims do not match payload");
    for (float v : a.values) put_f32(out, v);
}

struct Reader {
    std::ifstream in;
    std::filesystem::path path;

    std::uint32_t u32() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) fail(path, "truncated file");
        return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
               std::uint32_t(b[3]) << 24;
    }

    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (std::uint64_t(u32()) << 32);
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string str() {
        const std::uint32_t len = u32();
        if (len > (1u << 20)) fail(path, "string length out of range");
        std::string s(len, '\0');
        in.read(s.data(), std::streamsize(len));
        if (!in) fail(path, "truncated file");
        return s;
    }

    Checkpoint::Array array() {
        Checkpoint::Array a;
        a.name = str();
        const std::uint32_t rank = u32();
        if (rank > 8) fail(path, "array rank out of range");
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            a.dims.push_back(u32());
            numel *= a.dims.back();
        }
        if (numel > (std::size_t(1) << 31)) fail(path, "array size out of range");
        a.values.resize(numel);
        for (float& v : a.values) v = f32();
        return a;
    }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out.write(kMagic, 4);
    put_u32(out, ckpt.version);
    put_str(out, ckpt.arch);
    put_u32(out, std::uint32_t(ckpt.params.size()));
    for (const auto& a : ckpt.params) put_array(out, a);
    put_u64(out, ckpt.step_count);
    put_f32(out, ckpt.learning_rate);
    put_f32(out, ckpt.beta1);
    put_f32(out, ckpt.beta2);
    put_f32(out, ckpt.epsilon);
    put_u32(out, std::uint32_t(ckpt.moments.size()));
    for (const auto& a : ckpt.moments) put_array(out, a);
    put_u32(out, ckpt.epoch);
    put_str(out, ckpt.rng_descriptor);
    if (!out) fail(path, "write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Reader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in) fail(path, "cannot open");
    char magic[4];
    r.in.read(magic, 4);
    if (!r.in || std::memcmp(magic, kMagic, 4) != 0) fail(path, "bad magic");
    Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != 1) fail(path, "unsupported version " + std::to_string(ckpt.version));
    ckpt.arch = r.str();
    const std::uint32_t nparams = r.u32();
    for (std::uint32_t i = 0; i < nparams; ++i) ckpt.params.push_back(r.array());
    ckpt.step_count = r.u64();
    ckpt.learning_rate = r.f32();
    ckpt.beta1 = r.f32();
    ckpt.beta2 = r.f32();
    ckpt.epsilon = r.f32();
    const std::uint32_t nmoments = r.u32();
    for (std::uint32_t i = 0; i < nmoments; ++i) ckpt.moments.push_back(r.array());
    ckpt.epoch = r.u32();
    ckpt.rng_descriptor = r.str();
    return ckpt;
}

std::string rng_descriptor_from_seed(std::uint64_t seed) {
    return "splitmix64-seed:" + std::to_string(seed);
}

std::uint64_t seed_from_rng_descriptor(const std::string& descriptor) {
    const std::string prefix = "splitmix64-seed:";
    if (descriptor.rfind(prefix, 0) != 0)
        throw std::runtime_error("checkpoint: unknown RNG descriptor '" + descriptor + "'");
    return std::stoull(descriptor.substr(prefix.size()));
}

namespace {

std::vector<std::uint32_t> kernel_dims(const ConvParams& p) {
    return {std::uint32_t(p.kernel.n), std::uint32_t(p.kernel.c), std::uint32_t(p.kernel.h),
            std::uint32_t(p.kernel.w)};
}

}  // namespace

Checkpoint make_checkpoint(const Network& net, const OptimizerState& state,
                           const ArchSpec& arch, std::uint32_t epoch, std::uint64_t seed) {
    Checkpoint ckpt;
    ckpt.arch = arch_spec_to_string(arch);
    ckpt.step_count = std::uint64_t(state.step_count);
    ckpt.learning_rate = state.config.learning_rate;
    ckpt.beta1 = state.config.beta1;
    ckpt.beta2 = state.config.beta2;
    ckpt.epsilon = state.config.epsilon;
    ckpt.epoch = epoch;
    ckpt.rng_descriptor = rng_descriptor_from_seed(seed);

    for (const auto& layer : net.layers) {
        if (!layer.has_params()) continue;
        ckpt.params.push_back({layer.name + ".kernel", kernel_dims(layer.params),
                               layer.params.kernel.data});
        ckpt.params.push_back({layer.name + ".bias",
                               {std::uint32_t(layer.params.bias.size())}, layer.params.bias});
    }
    std::size_t slot = 0;
    for (const auto& p : ckpt.params) {
        if (slot >= state.first_moment.size() ||
            state.first_moment[slot].size() != p.values.size())
            throw std::logic_error("checkpoint: optimizer state does not match '" + p.name + "'");
        ckpt.moments.push_back({p.name + ".m", p.dims, state.first_moment[slot]});
        ckpt.moments.push_back({p.name + ".v", p.dims, state.second_moment[slot]});
        ++slot;
    }
    return ckpt;
}

RestoredRun restore_checkpoint(const Checkpoint& ckpt) {
    RestoredRun run;
    run.arch = arch_spec_from_string(ckpt.arch);
    run.net = build_network<float>(run.arch);
    run.epoch = ckpt.epoch;
    run.seed = seed_from_rng_descriptor(ckpt.rng_descriptor);

    AdamConfig<float> adam;
    adam.learning_rate = ckpt.learning_rate;
    adam.beta1 = ckpt.beta1;
    adam.beta2 = ckpt.beta2;
    adam.epsilon = ckpt.epsilon;
    run.state = OptimizerState::zeros_like(run.net, adam);
    run.state.step_count = std::int64_t(ckpt.step_count);

    std::size_t slot = 0;
    visit_params(run.net, [&](const std::string& name, std::vector<float>& values,
                              std::vector<float>&) {
        if (slot >= ckpt.params.size())
            throw std::runtime_error("checkpoint: missing parameter array '" + name + "'");
        const auto& p = ckpt.params[slot];
        if (p.name != name || p.values.size() != values.size())
            throw std::runtime_error("checkpoint: parameter '" + p.name +
                                     "' does not match architecture entry '" + name + "'");
        const auto& m = ckpt.moments[2 * slot];
        const auto& v = ckpt.moments[2 * slot + 1];
        if (m.name != name + ".m" || v.name != name + ".v" ||
            m.values.size() != values.size() || v.values.size() != values.size())
            throw std::runtime_error("checkpoint: optimizer arrays for '" + name +
                                     "' are inconsistent");
        values = p.values;
        run.state.first_moment[slot] = m.values;
        run.state.second_moment[slot] = v.values;
        ++slot;
    });
    if (slot != ckpt.params.size() || ckpt.moments.size() != 2 * slot)
        throw std::runtime_error("checkpoint: array count does not match architecture");
    return run;
}

}  // namespace dnfs
