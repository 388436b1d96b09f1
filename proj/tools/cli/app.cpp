#include "cli/app.h"

#include <algorithm>
#include <ostream>

#include "CLI11.hpp"
#include "cli/commands.h"
#include "json.hpp"
#include "radpose/errors.h"
#include "radpose/serialize.h"

namespace radpose::cli {

using nlohmann::json;

namespace {

void report(std::ostream& err, const char* kind, const std::string& message) {
    err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
    std::vector<std::string> out;
    for (const auto& p : paths) {
        out.push_back(p.generic_string());
    }
    return out;
}

json resolved(const GenDataOptions& o) {
    return {{"out", o.out.generic_string()},
            {"scenes", o.scenes},
            {"objects-per-scene", o.objects_per_scene},
            {"keypoints", o.keypoints}};
}

json resolved(const VoteOptions& o) {
    return {{"radial", o.radial.generic_string()},   {"depth", o.depth.generic_string()},
            {"intrinsics", o.intrinsics.generic_string()}, {"classes", o.classes.generic_string()},
            {"out", o.out.generic_string()},         {"voxel", o.voxel},
            {"max-instances", o.max_instances},      {"peak-separation", o.peak_separation}};
}

json resolved(const EstimateOptions& o) {
    return {{"keypoints", o.keypoints.generic_string()},
            {"models", o.models.generic_string()},
            {"intrinsics", o.intrinsics.generic_string()},
            {"out", o.out.generic_string()},
            {"min-keypoints", o.min_keypoints},
            {"discrepancy-tolerance", o.discrepancy_tolerance},
            {"icp", o.icp},
            {"depth", o.depth.generic_string()},
            {"classes", o.classes.generic_string()}};
}

json resolved(const EvalOptions& o) {
    return {{"gt", o.gt.generic_string()},
            {"est", o.est.generic_string()},
            {"mesh", path_strings(o.meshes)},
            {"models", o.models.generic_string()},
            {"intrinsics", o.intrinsics.generic_string()},
            {"out", o.out.generic_string()},
            {"metrics", o.metrics},
            {"auc-max", o.auc_max},
            {"auc-steps", o.auc_steps},
            {"fraction", o.fraction},
            {"vsd-delta", o.vsd_delta}};
}

json resolved(const MmdFitOptions& o) {
    return {{"source", o.source.generic_string()},
            {"target", o.target.generic_string()},
            {"out", o.out.generic_string()},
            {"kernel", o.kernel},
            {"estimator", o.estimator},
            {"objective", o.objective},
            {"scale", o.scale},
            {"epochs", o.epochs},
            {"lr", o.lr},
            {"rbf-w", o.rbf_w},
            {"lift", o.lift},
            {"projections", o.projections}};
}

json resolved(const PipelineOptions& o) {
    return {{"out", o.out.generic_string()},
            {"scenes", o.scenes},
            {"keypoints", o.keypoints},
            {"batch-size", o.batch_size},
            {"corruption-sigma", o.corruption_sigma},
            {"dropout", o.dropout},
            {"voxel", o.voxel},
            {"icp", o.icp},
            {"write-composites", o.write_composites}};
}

std::string scalar_text(const json& v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    if (v.is_number() || v.is_null()) {
        return v.dump();
    }
    throw CLI::ValidationError("config", "unsupported value " + v.dump());
}

// Values from the config file replace whatever the command line gave.
void apply_config(const json& config, CLI::App& app, CLI::App& sub) {
    if (!config.is_object()) {
        throw CLI::ValidationError("--config", "config file must hold a JSON object");
    }
    for (const auto& [key, value] : config.items()) {
        if (key == "command" || key == "config") {
            continue;
        }
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (opt == nullptr) {
            opt = app.get_option_no_throw("--" + key);
        }
        if (opt == nullptr) {
            throw CLI::ValidationError("--config", "unknown key '" + key + "'");
        }
        opt->clear();
        if (value.is_array()) {
            for (const auto& item : value) {
                opt->add_result(scalar_text(item));
            }
        } else {
            opt->add_result(scalar_text(value));
        }
        opt->run_callback();
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Keypoint radial voting, ePnP pose recovery, RKHS domain-gap fitting and pose metrics."};
    app.require_subcommand(1);

    Globals g;
    std::string config_path;
    app.add_option("--seed", g.seed, "Seed for every random draw");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--config", config_path, "JSON file whose keys override command-line flags");

    GenDataOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate labeled synthetic scenes");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--scenes", gen.scenes, "Number of scenes");
    gen_cmd->add_option("--objects-per-scene", gen.objects_per_scene, "Objects placed per scene");
    gen_cmd->add_option("--keypoints", gen.keypoints, "Keypoints per object");

    VoteOptions vt;
    auto* vote_cmd = app.add_subcommand("vote", "Detect keypoints by radial voting");
    vote_cmd->add_option("--radial", vt.radial, "RKR1 radial map stack")->required();
    vote_cmd->add_option("--depth", vt.depth, "RKR1 depth raster")->required();
    vote_cmd->add_option("--intrinsics", vt.intrinsics, "Intrinsics JSON (default: desk camera)");
    vote_cmd->add_option("--classes", vt.classes, "RKR1 class raster");
    vote_cmd->add_option("--out", vt.out, "Output directory")->required();
    vote_cmd->add_option("--voxel", vt.voxel, "Voxel size in meters");
    vote_cmd->add_option("--max-instances", vt.max_instances, "Peaks kept per class and keypoint");
    vote_cmd->add_option("--peak-separation", vt.peak_separation, "Minimum distance between peaks, meters");

    EstimateOptions est;
    auto* est_cmd = app.add_subcommand("estimate", "Group keypoints and solve ePnP");
    est_cmd->add_option("--keypoints", est.keypoints, "Keypoint set JSON")->required();
    est_cmd->add_option("--models", est.models, "Model keypoint JSON")->required();
    est_cmd->add_option("--intrinsics", est.intrinsics, "Intrinsics JSON (default: desk camera)");
    est_cmd->add_option("--out", est.out, "Output directory")->required();
    est_cmd->add_option("--min-keypoints", est.min_keypoints, "Minimum keypoints per instance");
    est_cmd->add_option("--discrepancy-tolerance", est.discrepancy_tolerance, "Grouping tolerance, meters");
    est_cmd->add_flag("--icp", est.icp, "Refine with ICP against --depth");
    est_cmd->add_option("--depth", est.depth, "RKR1 depth raster for ICP");
    est_cmd->add_option("--classes", est.classes, "RKR1 class raster for ICP");

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score estimated poses against ground truth");
    eval_cmd->add_option("--gt", ev.gt, "Ground-truth poses (list or labels JSON)")->required();
    eval_cmd->add_option("--est", ev.est, "Estimated poses")->required();
    eval_cmd->add_option("--mesh", ev.meshes, "Mesh per class id, in order");
    eval_cmd->add_option("--models", ev.models, "Model JSON naming meshes per class");
    eval_cmd->add_option("--intrinsics", ev.intrinsics, "Intrinsics JSON (default: desk camera)");
    eval_cmd->add_option("--out", ev.out, "Output directory")->required();
    eval_cmd->add_option("--metrics", ev.metrics, "Comma-separated subset of add,adds,auc,mssd,mspd,vsd,ar")
        ->delimiter(',');
    eval_cmd->add_option("--auc-max", ev.auc_max, "AUC upper threshold, meters");
    eval_cmd->add_option("--auc-steps", ev.auc_steps, "Samples of the emitted AUC curve");
    eval_cmd->add_option("--fraction", ev.fraction, "ADD(S) threshold as a fraction of the diameter");
    eval_cmd->add_option("--vsd-delta", ev.vsd_delta, "VSD visibility tolerance, meters");

    MmdFitOptions mf;
    auto* mmd_cmd = app.add_subcommand("mmd-fit", "Fit trainable kernel weights on MMD");
    mmd_cmd->add_option("--source", mf.source, "Source features (RKR1 or JSON matrix)")->required();
    mmd_cmd->add_option("--target", mf.target, "Target features (RKR1 or JSON matrix)")->required();
    mmd_cmd->add_option("--out", mf.out, "Output directory")->required();
    mmd_cmd->add_option("--kernel", mf.kernel, "linear or rbf")->check(CLI::IsMember({"linear", "rbf"}));
    mmd_cmd->add_option("--estimator", mf.estimator, "paper, biased or unbiased")
        ->check(CLI::IsMember({"paper", "biased", "unbiased"}));
    mmd_cmd->add_option("--objective", mf.objective, "minimize or maximize")
        ->check(CLI::IsMember({"minimize", "maximize"}));
    mmd_cmd->add_option("--scale", mf.scale, "Paper estimator normalization: m2 or m")
        ->check(CLI::IsMember({"m2", "m"}));
    mmd_cmd->add_option("--epochs", mf.epochs, "Gradient steps");
    mmd_cmd->add_option("--lr", mf.lr, "Learning rate");
    mmd_cmd->add_option("--rbf-w", mf.rbf_w, "Initial RBF weight");
    mmd_cmd->add_option("--lift", mf.lift, "Random linear lift factor (1 = none)");
    mmd_cmd->add_option("--projections", mf.projections, "Sliced Wasserstein projections");

    PipelineOptions pl;
    auto* pipe_cmd = app.add_subcommand("pipeline", "Pseudo-label and augmentation pipeline on generated scenes");
    pipe_cmd->add_option("--out", pl.out, "Output directory")->required();
    pipe_cmd->add_option("--scenes", pl.scenes, "Number of scenes");
    pipe_cmd->add_option("--keypoints", pl.keypoints, "Keypoints per object");
    pipe_cmd->add_option("--batch-size", pl.batch_size, "Composites per instance (augmented + original)");
    pipe_cmd->add_option("--corruption-sigma", pl.corruption_sigma, "Gaussian noise on radii, meters");
    pipe_cmd->add_option("--dropout", pl.dropout, "Share of foreground pixels dropped");
    pipe_cmd->add_option("--voxel", pl.voxel, "Voxel size in meters");
    pipe_cmd->add_flag("--icp", pl.icp, "Refine pseudo-poses with ICP");
    pipe_cmd->add_flag("--write-composites", pl.write_composites, "Write composite rasters");

    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
        CLI::App* sub = app.get_subcommands().front();
        if (!config_path.empty()) {
            apply_config(read_json(config_path), app, *sub);
        }

        const std::string name = sub->get_name();
        json config;
        fs::path out_dir;
        if (name == "gen-data") {
            gen_data(gen, g);
            config = resolved(gen);
            out_dir = gen.out;
        } else if (name == "vote") {
            vote(vt, g);
            config = resolved(vt);
            out_dir = vt.out;
        } else if (name == "estimate") {
            estimate(est, g);
            config = resolved(est);
            out_dir = est.out;
        } else if (name == "eval") {
            eval(ev, g);
            config = resolved(ev);
            out_dir = ev.out;
        } else if (name == "mmd-fit") {
            mmd_fit(mf, g);
            config = resolved(mf);
            out_dir = mf.out;
        } else {
            pipeline(pl, g);
            config = resolved(pl);
            out_dir = pl.out;
        }
        config["command"] = name;
        config["seed"] = g.seed;
        config["threads"] = g.threads;
        write_json(out_dir / "config.json", config);
        return kOk;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        report(err, "usage", e.what());
        return kUsage;
    } catch (const IoError& e) {
        report(err, "io", e.what());
        return kIo;
    } catch (const nlohmann::json::exception& e) {
        report(err, "io", e.what());
        return kIo;
    } catch (const DomainError& e) {
        report(err, "invariant", e.what());
        return kInvariant;
    } catch (const CapacityError& e) {
        report(err, "capacity", e.what());
        return kInvariant;
    } catch (const DegeneracyError& e) {
        report(err, "degenerate", e.what());
        return kInvariant;
    } catch (const std::exception& e) {
        report(err, "internal", e.what());
        return 1;
    }
}

}  // namespace radpose::cli
