// SPDX-License-Identifier: Apache-2.0

#include "fovseg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fovseg/checkpoint.hpp"
#include "fovseg/kernels.hpp"
#include "fovseg/parallel.hpp"

namespace fovseg {

ParsedMode parse_train_mode(const std::string& text) {
    if (text == "mean") return {TrainMode::kMean, 0};
    if (text == "gsm") return {TrainMode::kGsm, 0};
    if (text == "mode") return {TrainMode::kMode, 0};
    if (text == "random") return {TrainMode::kRandom, 0};
    if (text == "average") return {TrainMode::kAverage, 0};
    if (text.rfind("fixed-", 0) == 0) {
        const int d = std::stoi(text.substr(6));
        FOV_CONFIG_REQUIRE(d >= 0, "fixed mode index must be >= 0");
        return {TrainMode::kFixed, d};
    }
    throw ConfigError("unknown training mode: " + text);
}

static bool mode_trains_theta(TrainMode m) {
    return m == TrainMode::kMean || m == TrainMode::kGsm || m == TrainMode::kMode;
}

std::vector<MinibatchEntry> build_minibatch(const Dataset& data, const TrainConfig& cfg,
                                            RngStream& rng) {
    FOV_CONFIG_REQUIRE(!data.items.empty(), "build_minibatch: empty dataset");
    const int L = cfg.images_per_batch;
    const int B = cfg.locations_per_image;
    FOV_REQUIRE(L >= 1 && B >= 1, "build_minibatch: L and B must be >= 1");

    // L images, without replacement while the dataset allows it.
    std::vector<int> chosen;
    chosen.reserve(static_cast<std::size_t>(L));
    std::vector<int> pool(data.items.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
    for (int l = 0; l < L; ++l) {
        if (pool.empty()) {
            chosen.push_back(static_cast<int>(rng.uniform_index(data.items.size())));
        } else {
            const std::size_t k = rng.uniform_index(pool.size());
            chosen.push_back(pool[k]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
        }
    }

    std::vector<MinibatchEntry> batch;
    batch.reserve(static_cast<std::size_t>(L) * B);
    for (int item_index : chosen) {
        const DatasetItem& item = data.items[static_cast<std::size_t>(item_index)];
        const int h = item.lowres->height, w = item.lowres->width;
        for (int b = 0; b < B; ++b) {
            MinibatchEntry e;
            e.item_index = item_index;
            e.loc_lr = {static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(h))),
                        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(w)))};
            e.patches = extract_patch_set(*item.image, e.loc_lr, cfg.patch);
            e.labels = extract_label_patch(*item.labels, e.loc_lr, cfg.patch);
            batch.push_back(std::move(e));
        }
    }
    return batch;
}

void RunLog::write_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.precision(17);
    os << "iteration,loss,lr,tau,val_miou\n";
    for (const auto& r : rows) {
        os << r.iteration << "," << r.loss << "," << r.lr << "," << r.tau << ",";
        if (r.val_miou) os << *r.val_miou;
        os << "\n";
    }
    if (!os) throw IoError("write failed: " + path);
}

Trainer::Trainer(FoveationNet& fov, SegNet& seg, TrainConfig cfg)
    : fov_(fov), seg_(seg), cfg_(std::move(cfg)) {
    cfg_.patch.validate();
    mode_ = parse_train_mode(cfg_.mode);
    if (mode_.mode == TrainMode::kFixed)
        FOV_CONFIG_REQUIRE(mode_.fixed_d < cfg_.patch.d(), "fixed mode index out of range");
    FOV_CONFIG_REQUIRE(fov_.d() == cfg_.patch.d(),
                       "foveation output channels must equal the patch count D");
    // Theta joins the optimizer only in the jointly-trained modes; override
    // modes leave it bitwise untouched.
    std::vector<Parameter*> opt_params;
    if (mode_trains_theta(mode_.mode))
        for (Parameter* p : fov_.trainable_params()) opt_params.push_back(p);
    for (Parameter* p : seg_.trainable_params()) opt_params.push_back(p);
    AdamConfig acfg = cfg_.adam;
    acfg.lr0 = cfg_.lr0;
    adam_ = std::make_unique<Adam>(std::move(opt_params), acfg);
}

double Trainer::train_step(const Dataset& data, const std::vector<MinibatchEntry>& batch,
                           long t) {
    FOV_REQUIRE(!batch.empty(), "train_step: empty batch");
    const int P = static_cast<int>(batch.size());
    const int D = cfg_.patch.d();
    const bool trains_theta = mode_trains_theta(mode_.mode);
    const double seed_share = 1.0 / static_cast<double>(P);
    const TemperatureSchedule sched = cfg_.resolved_tau();

    fov_.params().zero_grad();
    seg_.params().zero_grad();

    // Distinct images in first-appearance order.
    std::vector<int> image_items;
    std::vector<int> image_of_patch(batch.size());
    for (std::size_t p = 0; p < batch.size(); ++p) {
        const int item = batch[p].item_index;
        int slot = -1;
        for (std::size_t i = 0; i < image_items.size(); ++i)
            if (image_items[i] == item) slot = static_cast<int>(i);
        if (slot < 0) {
            slot = static_cast<int>(image_items.size());
            image_items.push_back(item);
        }
        image_of_patch[p] = slot;
    }
    const std::size_t n_images = image_items.size();

    // Phase A: foveation forward per image (only when theta is trained).
    struct FovGraph {
        Graph graph;
        TensorPtr dist;
        ForwardTrace trace;
    };
    std::vector<FovGraph> fov_graphs(trains_theta ? n_images : 0);
    if (trains_theta) {
        parallel_for(n_images, cfg_.threads, [&](std::size_t i) {
            const ImageTensor& lr = *data.items[static_cast<std::size_t>(image_items[i])].lowres;
            auto& fg = fov_graphs[i];
            auto input = fg.graph.constant({lr.height, lr.width, lr.channels}, lr.values);
            fg.dist = fov_.forward(fg.graph, input, /*train=*/true, &fg.trace);
        });
    }

    // Phase B: per-patch graphs, forward + backward, in parallel.
    struct PatchWork {
        Graph graph;
        TensorPtr f_node;
        ForwardTrace trace;
        double loss = 0.0;
        long valid = 0;
    };
    std::vector<PatchWork> works(batch.size());
    parallel_for(batch.size(), cfg_.threads, [&](std::size_t p) {
        const MinibatchEntry& e = batch[p];
        PatchWork& w = works[p];

        std::vector<double> f_values(static_cast<std::size_t>(D), 0.0);
        switch (mode_.mode) {
            case TrainMode::kMean:
            case TrainMode::kGsm:
            case TrainMode::kMode: {
                const auto& dist = fov_graphs[static_cast<std::size_t>(image_of_patch[p])].dist;
                const int wlr = dist->dim(1);
                const std::size_t base =
                    (static_cast<std::size_t>(e.loc_lr.first) * wlr + e.loc_lr.second) * D;
                std::copy_n(dist->value.data() + base, D, f_values.begin());
                break;
            }
            case TrainMode::kFixed:
                f_values[static_cast<std::size_t>(mode_.fixed_d)] = 1.0;
                break;
            case TrainMode::kRandom: {
                RngStream rng = RngStream::derive(
                    cfg_.seed, "sampling.random",
                    static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(P) + p);
                f_values[rng.uniform_index(static_cast<std::uint64_t>(D))] = 1.0;
                break;
            }
            case TrainMode::kAverage:
                std::fill(f_values.begin(), f_values.end(), 1.0 / static_cast<double>(D));
                break;
        }

        w.f_node = trains_theta ? w.graph.leaf({D}, f_values, true)
                                : w.graph.constant({D}, f_values);

        TensorPtr input;
        if (mode_.mode == TrainMode::kMode) {
            input = mode_select(w.graph, w.f_node, e.patches);
        } else if (mode_.mode == TrainMode::kGsm) {
            RngStream rng = RngStream::derive(
                cfg_.seed, "sampling.gsm",
                static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(P) + p);
            auto weights = gsm_sample(w.graph, w.f_node, tau_at(sched, t), rng);
            input = mean_combine(w.graph, weights, e.patches);
        } else {
            input = mean_combine(w.graph, w.f_node, e.patches);
        }

        auto logits = seg_.forward(w.graph, input, /*train=*/true, &w.trace);
        auto ce = cross_entropy(w.graph, logits, e.labels, kIgnoreLabel);
        w.loss = ce.loss->value[0];
        w.valid = ce.valid_pixels;
        if (ce.loss->requires_grad && ce.valid_pixels > 0)
            w.graph.backward_seeded(ce.loss, std::span<const double>(&seed_share, 1));
    });

    // Phase C: serial reduction in patch order.
    std::vector<std::vector<double>> dist_grads(fov_graphs.size());
    for (std::size_t i = 0; i < fov_graphs.size(); ++i)
        dist_grads[i].assign(fov_graphs[i].dist->size(), 0.0);
    double total_loss = 0.0;
    for (std::size_t p = 0; p < works.size(); ++p) {
        const MinibatchEntry& e = batch[p];
        if (!std::isfinite(works[p].loss)) {
            const auto& item = data.items[static_cast<std::size_t>(e.item_index)];
            throw TrainingError("non-finite loss at iteration " + std::to_string(t) +
                                    ", image '" + item.id + "', location (" +
                                    std::to_string(e.loc_lr.first) + "," +
                                    std::to_string(e.loc_lr.second) + ")",
                                item.id, e.loc_lr);
        }
        total_loss += works[p].loss;
        works[p].trace.harvest_gradients();
        works[p].trace.apply_bn_updates(cfg_.bn_momentum);
        if (trains_theta) {
            const std::size_t img = static_cast<std::size_t>(image_of_patch[p]);
            const int wlr = fov_graphs[img].dist->dim(1);
            const std::size_t base =
                (static_cast<std::size_t>(e.loc_lr.first) * wlr + e.loc_lr.second) * D;
            kernels::accum(static_cast<std::size_t>(D), works[p].f_node->grad.data(),
                           dist_grads[img].data() + base);
        }
    }

    // Phase D: backward through the foveation graphs, harvest in image order.
    if (trains_theta) {
        parallel_for(fov_graphs.size(), cfg_.threads, [&](std::size_t i) {
            fov_graphs[i].graph.backward_seeded(fov_graphs[i].dist, dist_grads[i]);
        });
        for (auto& fg : fov_graphs) {
            fg.trace.harvest_gradients();
            fg.trace.apply_bn_updates(cfg_.bn_momentum);
        }
    }

    adam_->step(poly_lr(t, cfg_.iterations, cfg_.lr0, cfg_.lr_power));
    return total_loss * seed_share;
}

double Trainer::validate(const Dataset& val_data) {
    FOV_CONFIG_REQUIRE(!val_data.items.empty(), "validate: empty dataset");
    InferOptions opts;
    opts.mode = infer_mode_for_train_mode(cfg_.mode);
    opts.fixed_d = mode_.fixed_d;
    opts.seed = cfg_.seed;
    opts.threads = cfg_.threads;
    double total = 0.0;
    for (const auto& item : val_data.items) {
        const auto result = segment_image(*item.image, &fov_, seg_, cfg_.patch, opts);
        const auto scores = compute_scores(result.prediction, *item.labels, val_data.classes);
        total += scores.empty ? 0.0 : scores.miou;
    }
    return total / static_cast<double>(val_data.items.size());
}

TrainResult Trainer::fit(const Dataset& train_data, const Dataset& val_data,
                         const std::string& out_dir) {
    FOV_CONFIG_REQUIRE(!train_data.items.empty(), "fit: empty training dataset");
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    const TemperatureSchedule sched = cfg_.resolved_tau();

    const auto save_all = [&](const std::string& name) {
        if (out_dir.empty()) return;
        save_checkpoint((fs::path(out_dir) / name).string(), {&fov_.params(), &seg_.params()});
    };

    TrainResult result;
    for (long t = 0; t < cfg_.iterations; ++t) {
        RngStream data_rng = RngStream::derive(cfg_.seed, "data", static_cast<std::uint64_t>(t));
        auto batch = build_minibatch(train_data, cfg_, data_rng);
        const double loss = train_step(train_data, batch, t);

        RunLogRow row;
        row.iteration = t;
        row.loss = loss;
        row.lr = poly_lr(t, cfg_.iterations, cfg_.lr0, cfg_.lr_power);
        row.tau = tau_at(sched, t);
        if (cfg_.val_interval > 0 && (t + 1) % cfg_.val_interval == 0 && !val_data.items.empty()) {
            const double miou = validate(val_data);
            row.val_miou = miou;
            if (miou > result.best_val_miou) {
                result.best_val_miou = miou;
                result.best_iteration = t;
                save_all("checkpoint_best.fsck");
            }
        }
        result.log.rows.push_back(row);
    }

    save_all("checkpoint_last.fsck");
    if (result.best_iteration < 0) save_all("checkpoint_best.fsck");  // never validated
    result.log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out_dir.empty()) result.log.write_csv((fs::path(out_dir) / "runlog.csv").string());
    return result;
}

}  // namespace fovseg
