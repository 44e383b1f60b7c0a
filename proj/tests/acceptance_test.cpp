// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code is the failure count.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dnfs/arch.hpp"
#include "dnfs/checkpoint.hpp"
#include "dnfs/commands.hpp"
#include "dnfs/loss.hpp"
#include "dnfs/optimizer.hpp"
#include "test_util.hpp"

using namespace dnfs;
using testutil::check_gradient;
using testutil::conv_oracle;
using testutil::fill_uniform;
using testutil::random_conv_params;
using testutil::read_file_bytes;
using testutil::swap_kernel_channels;
using testutil::TempDir;

namespace {

struct Criterion {
    std::string name;
    std::function<bool(std::string&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor64 random_probs(SplitMix64& rng, int n, int h, int w) {
    Tensor64 t(n, 1, h, w);
    for (double& v : t.data) v = rng.uniform(0.02, 0.98);
    return t;
}

Tensor64 random_binary(SplitMix64& rng, int n, int h, int w, double p_black = 0.4) {
    Tensor64 t(n, 1, h, w);
    for (double& v : t.data) v = rng.uniform() < p_black ? 1.0 : 0.0;
    return t;
}

// Keeps every 2x2 window's top-two gap clear of the FD step.
void separate_pool_ties(Tensor64& t) {
    for (int n = 0; n < t.n; ++n)
        for (int c = 0; c < t.c; ++c)
            for (int i = 0; i < t.h; i += 2)
                for (int j = 0; j < t.w; j += 2) {
                    int bi = i, bj = j;
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj)
                            if (t.at(n, c, i + di, j + dj) > t.at(n, c, bi, bj)) {
                                bi = i + di;
                                bj = j + dj;
                            }
                    t.at(n, c, bi, bj) += 0.05;
                }
}

// --------------------------------------------------------------------------
// 1. Gradient suite: every differentiable primitive plus both losses.
// --------------------------------------------------------------------------
bool gradient_suite(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(1001);
    double worst_op = 0.0, worst_loss = 0.0;

    for (int trial = 0; trial < 20; ++trial) {
        {  // conv2d
            Tensor64 in(1 + int(rng.below(2)), 1 + int(rng.below(3)), 5, 7);
            fill_uniform(in, rng);
            auto p = random_conv_params<double>(rng, 1 + int(rng.below(3)), in.c, 3, 1, 1);
            Tensor64 w(in.n, p.c_out(), 5, 7);
            fill_uniform(w, rng);
            const auto g = conv2d_backward(in, p, w);
            auto f = [&] { return dot(w, conv2d_forward(in, p)); };
            for (auto* pair : {&in.data, &p.kernel.data, &p.bias}) {
                const auto& analytic = pair == &in.data        ? g.input.data
                                       : pair == &p.kernel.data ? g.kernel.data
                                                                : g.bias;
                auto st = check_gradient(f, *pair, analytic, 1e-4);
                worst_op = std::max(worst_op, st.max_rel);
                if (!st.ok) {
                    detail = "conv2d rel err " + std::to_string(st.max_rel);
                    return false;
                }
            }
        }
        {  // conv_transpose2d
            Tensor64 in(1, 1 + int(rng.below(2)), 3, 4);
            fill_uniform(in, rng);
            auto p = random_conv_params<double>(rng, 1 + int(rng.below(2)), in.c,
                                                2 + int(rng.below(2)), 1 + int(rng.below(2)), 0);
            const Tensor64 out = conv_transpose2d_forward(in, p);
            Tensor64 w(out.n, out.c, out.h, out.w);
            fill_uniform(w, rng);
            const auto g = conv_transpose2d_backward(in, p, w);
            auto f = [&] { return dot(w, conv_transpose2d_forward(in, p)); };
            for (auto* pair : {&in.data, &p.kernel.data, &p.bias}) {
                const auto& analytic = pair == &in.data        ? g.input.data
                                       : pair == &p.kernel.data ? g.kernel.data
                                                                : g.bias;
                auto st = check_gradient(f, *pair, analytic, 1e-4);
                worst_op = std::max(worst_op, st.max_rel);
                if (!st.ok) {
                    detail = "conv_transpose2d rel err " + std::to_string(st.max_rel);
                    return false;
                }
            }
        }
        {  // maxpool away from ties
            Tensor64 in(1, 1 + int(rng.below(2)), 4, 6);
            fill_uniform(in, rng);
            separate_pool_ties(in);
            const auto r = maxpool2_forward(in);
            Tensor64 w(r.output.n, r.output.c, r.output.h, r.output.w);
            fill_uniform(w, rng);
            const Tensor64 g = maxpool2_backward(r.argmax, w);
            auto f = [&] { return dot(w, maxpool2_forward(in).output); };
            auto st = check_gradient(f, in.data, g.data, 1e-4);
            worst_op = std::max(worst_op, st.max_rel);
            if (!st.ok) {
                detail = "maxpool rel err " + std::to_string(st.max_rel);
                return false;
            }
        }
        {  // relu and sigmoid
            Tensor64 in(1, 2, 3, 3);
            fill_uniform(in, rng, -2.0, 2.0);
            for (double& v : in.data)
                if (std::abs(v) < 5e-3) v += 0.01;
            Tensor64 w(1, 2, 3, 3);
            fill_uniform(w, rng);
            const Tensor64 gr = relu_backward(in, w);
            auto fr = [&] { return dot(w, relu_forward(in)); };
            auto st = check_gradient(fr, in.data, gr.data, 1e-4);
            worst_op = std::max(worst_op, st.max_rel);
            if (!st.ok) {
                detail = "relu rel err " + std::to_string(st.max_rel);
                return false;
            }
            const Tensor64 sg = sigmoid_backward(sigmoid_forward(in), w);
            auto fs = [&] { return dot(w, sigmoid_forward(in)); };
            st = check_gradient(fs, in.data, sg.data, 1e-4);
            worst_op = std::max(worst_op, st.max_rel);
            if (!st.ok) {
                detail = "sigmoid rel err " + std::to_string(st.max_rel);
                return false;
            }
        }
        {  // concat
            Tensor64 a(1, 2, 3, 3), b(1, 3, 3, 3);
            fill_uniform(a, rng);
            fill_uniform(b, rng);
            Tensor64 w(1, 5, 3, 3);
            fill_uniform(w, rng);
            const auto [ga, gb] = concat_channels_backward(w, a.c);
            auto f = [&] { return dot(w, concat_channels(a, b)); };
            auto st = check_gradient(f, a.data, ga.data, 1e-4);
            worst_op = std::max(worst_op, st.max_rel);
            if (!st.ok) {
                detail = "concat(a) rel err " + std::to_string(st.max_rel);
                return false;
            }
            st = check_gradient(f, b.data, gb.data, 1e-4);
            worst_op = std::max(worst_op, st.max_rel);
            if (!st.ok) {
                detail = "concat(b) rel err " + std::to_string(st.max_rel);
                return false;
            }
        }
        {  // losses at 1e-5 (FD step 1e-5 keeps truncation below tolerance)
            Tensor64 p = random_probs(rng, 1, 4, 4);
            Tensor64 y = random_binary(rng, 1, 4, 4);
            const auto ce = cross_entropy_loss(p, y);
            auto fce = [&] { return cross_entropy_loss(p, y).value; };
            auto st = check_gradient(fce, p.data, ce.grad.data, 1e-5, 1e-8, 1e-5);
            worst_loss = std::max(worst_loss, st.max_rel);
            if (!st.ok) {
                detail = "cross entropy rel err " + std::to_string(st.max_rel);
                return false;
            }
            const auto jc = jaccard_loss(p, y, 1.0);
            auto fjc = [&] { return jaccard_loss(p, y, 1.0).value; };
            st = check_gradient(fjc, p.data, jc.grad.data, 1e-5, 1e-8, 1e-5);
            worst_loss = std::max(worst_loss, st.max_rel);
            if (!st.ok) {
                detail = "jaccard rel err " + std::to_string(st.max_rel);
                return false;
            }
            const LossConfig cfg{0.5, 1.0, 0.5};
            const auto cl = composite_loss(p, y, cfg);
            auto fcl = [&] { return composite_loss(p, y, cfg).value; };
            st = check_gradient(fcl, p.data, cl.grad.data, 1e-5, 1e-8, 1e-5);
            worst_loss = std::max(worst_loss, st.max_rel);
            if (!st.ok) {
                detail = "composite rel err " + std::to_string(st.max_rel);
                return false;
            }
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "20 trials/op, worst op rel " << worst_op << ", worst loss rel " << worst_loss << ", "
       << secs << " s";
    detail = os.str();
    if (secs >= 120.0) {
        detail += " (over the 2 min budget)";
        return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 2. Convolution oracle and adjoint identity.
// --------------------------------------------------------------------------
bool conv_oracle_criterion(std::string& detail) {
    SplitMix64 rng(2002);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 1 + int(rng.below(3)), s = 1 + int(rng.below(2)), pad = int(rng.below(2));
        int h = k + s * int(rng.below(5)) - 2 * pad;
        while (h < 1) h += s;
        int w = k + s * int(rng.below(5)) - 2 * pad;
        while (w < 1) w += s;
        Tensor in(1 + int(rng.below(2)), 1 + int(rng.below(3)), h, w);
        fill_uniform(in, rng);
        auto p = random_conv_params<float>(rng, 1 + int(rng.below(4)), in.c, k, s, pad);
        if (conv2d_forward(in, p).data != conv_oracle(in, p).data) {
            detail = "mismatch vs direct-summation oracle at trial " + std::to_string(trial);
            return false;
        }
    }

    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const int c_in = 1 + int(rng.below(3)), c_out = 1 + int(rng.below(3));
        const int k = 2 + int(rng.below(2)), s = 1 + int(rng.below(2));
        auto p = random_conv_params<double>(rng, c_out, c_in, k, s, int(rng.below(2)));
        p.bias.assign(p.bias.size(), 0.0);
        Tensor64 x(1, c_in, 2 + int(rng.below(3)), 2 + int(rng.below(3)));
        fill_uniform(x, rng);
        const Tensor64 tx = conv_transpose2d_forward(x, p);
        Tensor64 g(tx.n, tx.c, tx.h, tx.w);
        fill_uniform(g, rng);
        const double lhs = dot(g, tx);
        const double rhs = dot(conv2d_forward(g, swap_kernel_channels(p)), x);
        const double rel = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12});
        worst = std::max(worst, rel);
        if (rel > 1e-5) {
            detail = "adjoint identity rel err " + std::to_string(rel);
            return false;
        }
    }
    detail = "50 exact oracle shapes, adjoint worst rel " + std::to_string(worst);
    return true;
}

// --------------------------------------------------------------------------
// 3. Composite loss endpoints and linearity in psi.
// --------------------------------------------------------------------------
bool eq1_endpoints(std::string& detail) {
    SplitMix64 rng(3003);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Tensor64 p = random_probs(rng, 1 + int(rng.below(2)), 4, 4);
        Tensor64 y = random_binary(rng, p.n, 4, 4);
        const double ce = cross_entropy_loss(p, y).value;
        const double jc = jaccard_loss(p, y, 1.0).value;
        const double at1 = composite_loss(p, y, LossConfig{1.0, 1.0, 0.5}).value;
        const double at0 = composite_loss(p, y, LossConfig{0.0, 1.0, 0.5}).value;
        const double psi = rng.uniform();
        const double mid = composite_loss(p, y, LossConfig{psi, 1.0, 0.5}).value;
        const double e1 = std::abs(at1 - ce);
        const double e0 = std::abs(at0 - jc);
        const double el = std::abs(mid - (psi * at1 + (1.0 - psi) * at0));
        worst = std::max({worst, e1, e0, el});
        if (e1 > 1e-12 || e0 > 1e-12 || el > 1e-12) {
            detail = "endpoint/linearity error " + std::to_string(worst);
            return false;
        }
    }
    detail = "50 random pairs, worst deviation " + std::to_string(worst);
    return true;
}

// --------------------------------------------------------------------------
// 4. Metric oracles against brute-force set counting.
// --------------------------------------------------------------------------
bool metric_oracles(std::string& detail) {
    SplitMix64 rng(4004);
    int recall_cases = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Tensor64 p = random_probs(rng, 1, 8, 8);
        Tensor64 y = random_binary(rng, 1, 8, 8, rng.uniform(0.05, 0.95));
        long inter = 0, uni = 0, black = 0, hits = 0;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const bool pb = p.data[i] > 0.5;
            const bool yb = y.data[i] == 1.0;
            inter += pb && yb;
            uni += pb || yb;
            black += yb;
            hits += pb && yb;
        }
        const double want_iou = uni == 0 ? 1.0 : double(inter) / double(uni);
        if (iou_metric(p, y, 0.5) != want_iou) {
            detail = "iou mismatch at trial " + std::to_string(trial);
            return false;
        }
        if (black > 0) {
            ++recall_cases;
            if (black_pixel_correctness(p, y, 0.5) != double(hits) / double(black)) {
                detail = "recall mismatch at trial " + std::to_string(trial);
                return false;
            }
        }
    }
    detail = "100 pairs exact (" + std::to_string(recall_cases) + " with black pixels)";
    return true;
}

// --------------------------------------------------------------------------
// 5. Parameter counting.
// --------------------------------------------------------------------------
bool parameter_counting(std::string& detail) {
    for (int m : {4, 8, 16, 32}) {
        const auto d = build_dnfs<float>(ArchSpec{ArchFamily::dnfs, m, 3, 1});
        const auto u = build_unet_like<float>(ArchSpec{ArchFamily::unet_like, m, 3, 1});
        for (const auto* net : {&d, &u}) {
            std::int64_t stored = 0;
            visit_params(*net, [&](const std::string&, const std::vector<float>& values,
                                   const std::vector<float>&) {
                stored += std::int64_t(values.size());
            });
            if (count_parameters(*net) != stored) {
                detail = "formula != enumeration at m=" + std::to_string(m);
                return false;
            }
        }
        if (count_parameters(d) >= count_parameters(u)) {
            detail = "dnfs not smaller than unet-like at m=" + std::to_string(m);
            return false;
        }
    }
    const auto net8 = build_dnfs<float>(ArchSpec{ArchFamily::dnfs, 8, 3, 1});
    if (count_parameters(net8) != 72889) {
        detail = "dnfs-8 count " + std::to_string(count_parameters(net8)) + " != 72889";
        return false;
    }
    detail = "dnfs-8 = 72889; dnfs(m) < unet-like(m) for m in {4,8,16,32}";
    return true;
}

// --------------------------------------------------------------------------
// 6. End-to-end tiny-network gradient check.
// --------------------------------------------------------------------------
bool tiny_e2e_gradient(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    auto net = build_dnfs<double>(ArchSpec{ArchFamily::dnfs, 1, 3, 1});
    init_parameters(net, 42);
    SplitMix64 rng(43);
    Tensor64 input(1, 1, 8, 8);
    fill_uniform(input, rng, 0.0, 1.0);
    Tensor64 target(1, 1, 8, 8);
    for (double& v : target.data) v = rng.uniform() < 0.35 ? 1.0 : 0.0;
    const LossConfig cfg{0.5, 1.0, 0.5};

    auto loss_value = [&] {
        return composite_loss(clamp_probabilities(forward(net, input), 1e-12), target, cfg)
            .value;
    };
    ForwardCache<double> cache;
    const Tensor64 raw = forward(net, input, &cache);
    LossResult<double> loss = composite_loss(clamp_probabilities(raw, 1e-12), target, cfg);
    zero_clamped_gradient(raw, 1e-12, loss.grad);
    backward(net, cache, loss.grad);

    double max_rel = 0.0;
    int checked = 0;
    bool ok = true;
    visit_params(net, [&](const std::string&, std::vector<double>& values,
                          std::vector<double>& grads) {
        auto st = check_gradient(loss_value, values, grads, 1e-3);
        max_rel = std::max(max_rel, st.max_rel);
        checked += st.checked;
        if (!st.ok) ok = false;
    });
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << checked << " components, max rel " << max_rel << ", " << secs << " s";
    detail = os.str();
    if (secs >= 300.0) {
        detail += " (over the 5 min budget)";
        return false;
    }
    return ok;
}

// --------------------------------------------------------------------------
// 7. Training smoke test at the frozen desk-scale config.
// --------------------------------------------------------------------------
bool training_smoke(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    TempDir tmp("acceptance_smoke");
    RunConfig cfg;
    cfg.arch = "dnfs-4";
    cfg.psi = 0.5;
    cfg.epochs = 20;
    cfg.batch_size = 8;
    cfg.samples = 200;
    cfg.image_size = 64;
    cfg.thickness = 3;
    cfg.horizons = 4;
    cfg.seed = 1;
    cfg.dataset_dir = (tmp.path / "data").string();
    cfg.output_dir = (tmp.path / "run").string();
    cmd_generate(cfg);
    const Dataset data = load_dataset(cfg.dataset_dir);
    const TrainResult r = train_model(cfg, data);
    const double secs = seconds_since(t0);

    const double initial = r.history.front().train_loss;
    const double final_loss = r.history.back().train_loss;
    const double iou = r.history.back().val_iou;
    const double recall = r.history.back().val_black_recall;
    std::ostringstream os;
    os << "train loss " << initial << " -> " << final_loss << ", val_iou " << iou
       << ", val_black_recall " << recall << ", " << secs << " s";
    detail = os.str();
    if (!(final_loss < 0.5 * initial)) {
        detail += " (loss did not halve)";
        return false;
    }
    if (!(recall >= 0.6)) {
        detail += " (recall below 0.6)";
        return false;
    }
    if (!(iou >= 0.35)) {
        detail += " (iou below 0.35)";
        return false;
    }
    if (secs > 900.0) {
        detail += " (over the 15 min budget)";
        return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 8. Determinism: identical runs byte-identical, resume bitwise.
// --------------------------------------------------------------------------
bool determinism_resume(std::string& detail) {
    TempDir tmp("acceptance_det");
    RunConfig cfg;
    cfg.arch = "dnfs-1";
    cfg.samples = 48;
    cfg.image_size = 32;
    cfg.horizons = 3;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 7;
    cfg.dataset_dir = (tmp.path / "data").string();
    cmd_generate(cfg);
    const Dataset data = load_dataset(cfg.dataset_dir);

    RunConfig a = cfg, b = cfg;
    a.output_dir = (tmp.path / "a").string();
    b.output_dir = (tmp.path / "b").string();
    train_model(a, data);
    train_model(b, data);
    if (read_file_bytes(tmp.path / "a" / "metrics.csv") !=
        read_file_bytes(tmp.path / "b" / "metrics.csv")) {
        detail = "metrics.csv differs between identical runs";
        return false;
    }
    for (const char* name : {"epoch_0001.ckpt", "epoch_0002.ckpt", "epoch_0003.ckpt",
                             "last.ckpt", "best.ckpt"}) {
        if (read_file_bytes(tmp.path / "a" / name) != read_file_bytes(tmp.path / "b" / name)) {
            detail = std::string("checkpoint ") + name + " differs between identical runs";
            return false;
        }
    }

    RunConfig short_run = cfg;
    short_run.epochs = 2;
    short_run.output_dir = (tmp.path / "short").string();
    train_model(short_run, data);
    RunConfig resumed = cfg;
    resumed.output_dir = (tmp.path / "resumed").string();
    train_model(resumed, data, (tmp.path / "short" / "last.ckpt").string());
    if (read_file_bytes(tmp.path / "a" / "epoch_0003.ckpt") !=
        read_file_bytes(tmp.path / "resumed" / "epoch_0003.ckpt")) {
        detail = "resumed epoch 3 checkpoint differs from the uninterrupted run";
        return false;
    }
    detail = "identical runs byte-identical; resume at epoch 2 matches bitwise";
    return true;
}

// --------------------------------------------------------------------------
// 9. Sweep harness.
// --------------------------------------------------------------------------
bool sweep_harness(std::string& detail) {
    TempDir tmp("acceptance_sweep");
    RunConfig cfg;
    cfg.arch = "dnfs-1";
    cfg.samples = 24;
    cfg.image_size = 32;
    cfg.horizons = 3;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 5;
    cfg.dataset_dir = (tmp.path / "data").string();
    cfg.output_dir = (tmp.path / "sweep").string();
    cmd_generate(cfg);
    const auto rows = cmd_sweep(cfg, {1, 2}, {0.3, 0.7});
    if (rows.size() != 4) {
        detail = "expected 4 sweep rows, got " + std::to_string(rows.size());
        return false;
    }

    std::ifstream in(tmp.path / "sweep" / "sweep.csv");
    std::string line;
    std::getline(in, line);
    if (line != "arch,multiplier,psi,params,train_seconds,val_iou,val_black_recall") {
        detail = "bad sweep.csv header: " + line;
        return false;
    }
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 7) {
            detail = "sweep.csv row has " + std::to_string(fields.size()) + " fields";
            return false;
        }
        if (row_index >= rows.size()) {
            detail = "sweep.csv has more rows than the sweep returned";
            return false;
        }
        const auto& row = rows[row_index++];
        if (row.failed) {
            detail = "sweep cell failed: m=" + std::to_string(row.multiplier);
            return false;
        }
        RunConfig cell = cfg;
        cell.multiplier = row.multiplier;
        const std::int64_t want = count_parameters(build_network<float>(resolve_arch(cell)));
        if (std::stoll(fields[3]) != want || row.params != want) {
            detail = "params column " + fields[3] + " != count-params " + std::to_string(want);
            return false;
        }
    }
    if (row_index != 4) {
        detail = "sweep.csv has " + std::to_string(row_index) + " data rows, expected 4";
        return false;
    }
    detail = "2x2 grid, params column cross-checked against count-params";
    return true;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"gradient-suite", gradient_suite},
        {"conv-oracle-and-adjoint", conv_oracle_criterion},
        {"composite-loss-endpoints-linearity", eq1_endpoints},
        {"metric-oracles", metric_oracles},
        {"parameter-counting", parameter_counting},
        {"tiny-network-e2e-gradient", tiny_e2e_gradient},
        {"training-smoke", training_smoke},
        {"determinism-and-resume", determinism_resume},
        {"sweep-harness", sweep_harness},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("%s %s (%s)\n", ok ? "PASS" : "FAIL", c.name.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
