// Command-line pipeline: generate synthetic cohorts, estimate normal
// ranges, train the closed-set classifier, fit the open-set model, predict,
// evaluate, and export distance scatter data.
//
// Exit codes: 0 success, 1 usage error, 2 data or model error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "apmax/batch.hpp"
#include "apmax/classifier.hpp"
#include "apmax/dataset.hpp"
#include "apmax/eval.hpp"
#include "apmax/openset.hpp"
#include "apmax/pattern.hpp"
#include "apmax/synth.hpp"

namespace {

using nlohmann::json;

void require_input(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) {
        throw std::runtime_error("input file not found: " + p.string());
    }
}

void require_output_dir(const std::filesystem::path& p) {
    const auto parent = p.parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
        throw std::runtime_error("output directory not found: " + parent.string());
    }
}

apmax::Dataset read_dataset(const std::filesystem::path& p) {
    require_input(p);
    auto ds = apmax::parse_dataset(p, apmax::format_from_extension(p));
    apmax::validate_dataset(ds);
    return ds;
}

json read_json(const std::filesystem::path& p) {
    require_input(p);
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("invalid JSON in " + p.string() + ": " + e.what());
    }
    return j;
}

void write_json(const json& j, const std::filesystem::path& p) {
    require_output_dir(p);
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + p.string());
}

struct GenOptions {
    std::string preset;
    std::vector<int> counts;
    std::uint64_t seed = 0;
    std::string out;
    std::vector<double> split;
    std::optional<std::uint64_t> split_seed;
    std::string train_out, val_out, test_out;
};

void run_gen(const GenOptions& opt) {
    const auto preset = apmax::preset_from_string(opt.preset);
    if (!preset) throw std::runtime_error("unknown preset '" + opt.preset + "'");
    require_output_dir(opt.out);

    apmax::CohortSpec spec = apmax::default_spec(*preset);
    spec.n_ad = opt.counts[0];
    spec.n_cn = opt.counts[1];
    spec.n_unknown = opt.counts[2];
    spec.seed = opt.seed;
    const apmax::Dataset cohort = apmax::generate_cohort(spec);
    apmax::write_dataset(cohort, opt.out, apmax::format_from_extension(opt.out));
    std::cout << "wrote " << cohort.size() << " records to " << opt.out << '\n';

    if (!opt.train_out.empty()) {
        apmax::SplitFractions fractions;
        if (!opt.split.empty()) {
            fractions = {opt.split[0], opt.split[1], opt.split[2]};
        }
        const auto split = apmax::split_dataset(
            cohort, fractions, opt.split_seed.value_or(opt.seed));
        for (const auto& [part, path] :
             {std::pair{&split.train, &opt.train_out},
              {&split.validation, &opt.val_out},
              {&split.test, &opt.test_out}}) {
            require_output_dir(*path);
            apmax::write_dataset(*part, *path,
                                 apmax::format_from_extension(*path));
            std::cout << "wrote " << part->size() << " records to " << *path
                      << '\n';
        }
    }
}

struct RangesOptions {
    std::string in, out, overrides;
    int min_samples = 20;
};

void run_ranges(const RangesOptions& opt) {
    const auto ds = read_dataset(opt.in);
    apmax::PartialRangeTable overrides = apmax::guideline_overrides();
    if (!opt.overrides.empty()) {
        overrides = apmax::partial_range_table_from_json(read_json(opt.overrides));
    }
    const auto table =
        apmax::estimate_normal_ranges(ds, overrides, opt.min_samples);
    write_json(apmax::range_table_to_json(table), opt.out);
    std::cout << "wrote normal ranges to " << opt.out << '\n';
}

struct TrainOptions {
    std::string train, val, out;
    apmax::TrainConfig config;
};

void run_train(const TrainOptions& opt) {
    const auto train = read_dataset(opt.train);
    const auto val = read_dataset(opt.val);
    require_output_dir(opt.out);
    const auto model = apmax::train_classifier(train, val, opt.config);
    apmax::save_classifier(model, opt.out);
    std::cout << "validation accuracy: "
              << apmax::format_double(apmax::classifier_accuracy(model, val))
              << '\n';
}

struct FitOpenOptions {
    std::string train, classifier, ranges, out;
    std::vector<int> n_centers{3};
    std::vector<double> quantiles{0.95};
    std::optional<int> tail_size;
    int alpha = 2;
    bool flag_f = true;
    std::string rank_factor = "as-printed";
    int batch_size = 256;
    int iterations = 100;
    std::uint64_t seed = 0;
    bool no_baseline = false;
};

void run_fit_open(const FitOpenOptions& opt) {
    const auto train = read_dataset(opt.train);
    const auto classifier = apmax::load_classifier(opt.classifier);
    const auto ranges = apmax::range_table_from_json(read_json(opt.ranges));
    require_output_dir(opt.out);

    apmax::OpenFitConfig config;
    config.n_centers = {opt.n_centers[0],
                        opt.n_centers.size() > 1 ? opt.n_centers[1]
                                                 : opt.n_centers[0]};
    config.quantiles = {opt.quantiles[0],
                        opt.quantiles.size() > 1 ? opt.quantiles[1]
                                                 : opt.quantiles[0]};
    config.tail_size = opt.tail_size;
    config.alpha = opt.alpha;
    config.flag_f = opt.flag_f;
    const auto factor = apmax::rank_factor_from_string(opt.rank_factor);
    if (!factor) {
        throw std::runtime_error("unknown rank factor '" + opt.rank_factor + "'");
    }
    config.rank_factor = *factor;
    config.batch_size = opt.batch_size;
    config.iterations = opt.iterations;
    config.seed = opt.seed;
    config.fit_openmax_baseline = !opt.no_baseline;

    auto model = apmax::fit_openapmax(train, classifier, ranges, config);
    model.classifier_file = opt.classifier;
    apmax::save_openapmax(model, opt.out);
    for (const auto& cat : model.categories) {
        std::cout << "category " << apmax::to_string(cat.category)
                  << ": threshold " << apmax::format_double(cat.threshold)
                  << " at quantile " << apmax::format_double(cat.quantile) << '\n';
    }
}

constexpr std::string_view kPredictionHeader =
    "subject_id,visit_id,P_unknown,P_AD,P_CN,dist_AD,dist_CN,decision";

struct PredictOptions {
    std::string model, in, out;
    std::string method = "openapmax";
    double tau = 0.5;
    int threads = 1;
};

void run_predict(const PredictOptions& opt) {
    const auto model = apmax::load_openapmax(opt.model);
    const auto ds = read_dataset(opt.in);
    require_output_dir(opt.out);
    const auto method = apmax::method_from_string(opt.method);
    if (!method) throw std::runtime_error("unknown method '" + opt.method + "'");

    const auto preds =
        apmax::predict_batch(model, ds, *method, opt.tau, opt.threads);

    std::ofstream out(opt.out);
    if (!out) {
        throw std::runtime_error("cannot open " + opt.out + " for writing");
    }
    out << "# openapmax predictions v1\n" << kPredictionHeader << '\n';
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& rec = ds.records[i];
        const auto& p = preds[i];
        out << rec.subject_id << ',' << rec.visit_id;
        for (double prob : p.probs) out << ',' << apmax::format_double(prob);
        for (double dist : p.distances) out << ',' << apmax::format_double(dist);
        out << ',' << apmax::to_string(p.decision) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + opt.out);
    std::cout << "wrote " << preds.size() << " predictions to " << opt.out << '\n';
}

struct EvalOptions {
    std::string pred, truth, out;
    apmax::BootstrapConfig config;
};

void run_eval(const EvalOptions& opt) {
    require_input(opt.pred);
    const auto truth_ds = read_dataset(opt.truth);
    require_output_dir(opt.out);

    std::map<std::pair<std::string, std::string>, std::optional<apmax::Category>>
        truth_by_visit;
    for (const auto& rec : truth_ds.records) {
        truth_by_visit[{rec.subject_id, rec.visit_id}] = rec.label;
    }

    std::ifstream in(opt.pred);
    if (!in) throw std::runtime_error("cannot open " + opt.pred);
    std::vector<apmax::PredictedRow> preds;
    std::vector<apmax::Category> truth;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!saw_header) {
            if (line != kPredictionHeader) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": unexpected prediction header");
            }
            saw_header = true;
            continue;
        }
        const auto fields = apmax::split_csv_line(line);
        if (fields.size() != 8) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": expected 8 fields, got " +
                                     std::to_string(fields.size()));
        }
        apmax::PredictedRow row;
        for (int i = 0; i < 3; ++i) {
            row.probs[i] = apmax::parse_csv_double(fields[2 + i], line_no);
        }
        const auto decision = apmax::category_from_string(fields[7]);
        if (!decision) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": unknown decision '" + fields[7] + "'");
        }
        row.decision = *decision;

        const auto it = truth_by_visit.find({fields[0], fields[1]});
        if (it == truth_by_visit.end()) {
            throw std::runtime_error("prediction (" + fields[0] + ", " + fields[1] +
                                     ") has no matching truth record");
        }
        if (!it->second) {
            throw std::runtime_error("truth record (" + fields[0] + ", " +
                                     fields[1] + ") is unlabeled");
        }
        preds.push_back(row);
        truth.push_back(*it->second);
    }
    if (!saw_header) throw std::runtime_error("prediction file has no header");

    const auto report = apmax::evaluate(preds, truth, opt.config);
    write_json(apmax::eval_report_to_json(report), opt.out);

    std::cout << "n: " << report.n << '\n';
    for (const auto& [category, m] : report.sensitivity) {
        std::cout << "sensitivity " << apmax::to_string(category) << ": "
                  << apmax::format_double(m.value) << " ["
                  << apmax::format_double(m.lo) << ", "
                  << apmax::format_double(m.hi) << "]\n";
    }
    for (const auto& [category, m] : report.auc) {
        std::cout << "auc " << apmax::to_string(category) << ": "
                  << apmax::format_double(m.value) << " ["
                  << apmax::format_double(m.lo) << ", "
                  << apmax::format_double(m.hi) << "]\n";
    }
}

struct FigOptions {
    std::string model, in, out;
};

void run_fig(const FigOptions& opt) {
    const auto model = apmax::load_openapmax(opt.model);
    const auto ds = read_dataset(opt.in);
    require_output_dir(opt.out);

    std::ofstream out(opt.out);
    if (!out) {
        throw std::runtime_error("cannot open " + opt.out + " for writing");
    }
    out << "# openapmax fig-distances v1\ndist_AD,dist_CN,label\n";
    for (const auto& rec : ds.records) {
        const auto pred = apmax::predict_openapmax(model, rec);
        out << apmax::format_double(pred.distances[0]) << ','
            << apmax::format_double(pred.distances[1]) << ','
            << (rec.label ? apmax::to_string(*rec.label) : std::string_view{})
            << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + opt.out);
    std::cout << "wrote " << ds.size() << " rows to " << opt.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Abnormal-pattern open-set diagnosis pipeline"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic cohort");
    gen_cmd->add_option("--preset", gen.preset,
                        "screening, single-strategy or multi-strategy")
        ->required();
    gen_cmd->add_option("--counts", gen.counts, "AD,CN,Unknown record counts")
        ->delimiter(',')
        ->expected(3)
        ->required();
    gen_cmd->add_option("--seed", gen.seed, "generation seed")->required();
    gen_cmd->add_option("--out", gen.out, "cohort output (.csv or .jsonl)")
        ->required();
    gen_cmd->add_option("--split", gen.split,
                        "train,validation,test fractions (default 0.8,0.05,0.15)")
        ->delimiter(',')
        ->expected(3);
    gen_cmd->add_option("--split-seed", gen.split_seed,
                        "split shuffle seed (default: --seed)");
    auto* train_out =
        gen_cmd->add_option("--train-out", gen.train_out, "train split output");
    auto* val_out =
        gen_cmd->add_option("--val-out", gen.val_out, "validation split output");
    auto* test_out =
        gen_cmd->add_option("--test-out", gen.test_out, "test split output");
    train_out->needs(val_out)->needs(test_out);
    val_out->needs(train_out);
    test_out->needs(train_out);
    gen_cmd->callback([&] { run_gen(gen); });

    RangesOptions ranges;
    auto* ranges_cmd =
        app.add_subcommand("ranges", "estimate per-category normal ranges");
    ranges_cmd->add_option("--in", ranges.in, "training dataset")->required();
    ranges_cmd->add_option("--out", ranges.out, "range table JSON output")
        ->required();
    ranges_cmd->add_option("--overrides", ranges.overrides,
                           "override table JSON (default: built-in MMSE/MOCA "
                           "guideline bounds)");
    ranges_cmd->add_option("--min-samples", ranges.min_samples,
                           "observations required per estimated range");
    ranges_cmd->callback([&] { run_ranges(ranges); });

    TrainOptions train;
    auto* train_cmd =
        app.add_subcommand("train", "train the closed-set classifier");
    train_cmd->add_option("--train", train.train, "training dataset")->required();
    train_cmd->add_option("--val", train.val, "validation dataset")->required();
    train_cmd->add_option("--out", train.out, "classifier JSON output")
        ->required();
    train_cmd->add_option("--seed", train.config.seed, "training seed")
        ->required();
    train_cmd->add_option("--learning-rate", train.config.learning_rate,
                          "Adam learning rate");
    train_cmd->add_option("--l2", train.config.l2, "L2 penalty coefficient");
    train_cmd->add_option("--batch-size", train.config.batch_size,
                          "minibatch size");
    train_cmd->add_option("--max-epochs", train.config.max_epochs,
                          "epoch budget");
    train_cmd->add_option("--patience", train.config.patience,
                          "early-stop patience in epochs");
    train_cmd->callback([&] { run_train(train); });

    FitOpenOptions fit;
    auto* fit_cmd = app.add_subcommand("fit-open", "fit the open-set model");
    fit_cmd->add_option("--train", fit.train, "training dataset")->required();
    fit_cmd->add_option("--classifier", fit.classifier, "classifier JSON")
        ->required();
    fit_cmd->add_option("--ranges", fit.ranges, "range table JSON")->required();
    fit_cmd->add_option("--out", fit.out, "model bundle output")->required();
    fit_cmd->add_option("--seed", fit.seed, "clustering seed")->required();
    fit_cmd->add_option("--n-centers", fit.n_centers,
                        "centers per category (one value or AD,CN)")
        ->delimiter(',')
        ->expected(1, 2);
    fit_cmd->add_option("--quantile", fit.quantiles,
                        "threshold quantile (one value or AD,CN)")
        ->delimiter(',')
        ->expected(1, 2);
    fit_cmd->add_option("--tail-size", fit.tail_size,
                        "tail size (default min(20, ceil(n/2)))");
    fit_cmd->add_option("--alpha", fit.alpha, "classes to revise");
    fit_cmd->add_option("--flag-f", fit.flag_f,
                        "apply the threshold correction (default true)");
    fit_cmd->add_option("--rank-factor", fit.rank_factor,
                        "as-printed or openmax");
    fit_cmd->add_option("--batch-size", fit.batch_size, "clustering batch size");
    fit_cmd->add_option("--iterations", fit.iterations,
                        "clustering iterations");
    fit_cmd->add_flag("--no-baseline", fit.no_baseline,
                      "skip the activation-space baseline");
    fit_cmd->callback([&] { run_fit_open(fit); });

    PredictOptions predict;
    auto* predict_cmd = app.add_subcommand("predict", "predict a dataset");
    predict_cmd->add_option("--model", predict.model, "model bundle")->required();
    predict_cmd->add_option("--in", predict.in, "dataset to predict")->required();
    predict_cmd->add_option("--out", predict.out, "prediction CSV output")
        ->required();
    predict_cmd->add_option("--method", predict.method,
                            "openapmax, openmax or softmax-threshold");
    predict_cmd->add_option("--tau", predict.tau,
                            "softmax-threshold confidence cutoff");
    predict_cmd->add_option("--threads", predict.threads, "prediction threads");
    predict_cmd->callback([&] { run_predict(predict); });

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions");
    eval_cmd->add_option("--pred", eval.pred, "prediction CSV")->required();
    eval_cmd->add_option("--truth", eval.truth, "labeled dataset")->required();
    eval_cmd->add_option("--out", eval.out, "report JSON output")->required();
    eval_cmd->add_option("--seed", eval.config.seed, "bootstrap seed")
        ->required();
    eval_cmd->add_option("--trials", eval.config.trials, "bootstrap trials");
    eval_cmd->add_option("--resample-n", eval.config.resample_n,
                         "resample size per trial");
    eval_cmd->add_option("--threads", eval.config.threads, "bootstrap threads");
    eval_cmd->callback([&] { run_eval(eval); });

    FigOptions fig;
    auto* fig_cmd = app.add_subcommand(
        "fig-distances", "export per-record combined distances");
    fig_cmd->add_option("--model", fig.model, "model bundle")->required();
    fig_cmd->add_option("--in", fig.in, "dataset")->required();
    fig_cmd->add_option("--out", fig.out, "distance CSV output")->required();
    fig_cmd->callback([&] { run_fig(fig); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
