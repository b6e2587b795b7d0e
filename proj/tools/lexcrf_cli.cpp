#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexcrf/checks.hpp"
#include "lexcrf/config.hpp"
#include "lexcrf/data.hpp"
#include "lexcrf/eval.hpp"
#include "lexcrf/model.hpp"
#include "lexcrf/model_io.hpp"
#include "lexcrf/synth.hpp"
#include "lexcrf/train.hpp"

namespace {

using namespace lexcrf;

nlohmann::json metrics_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch},       {"l_tree", m.l_tree},
            {"l_label", m.l_label},   {"l_reg", m.l_reg},
            {"total", m.total},       {"dev_precision", m.dev_precision},
            {"dev_recall", m.dev_recall}, {"dev_f1", m.dev_f1},
            {"lr", m.lr},             {"best", m.best}};
}

int cmd_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& out_path,
              const std::string& metrics_path) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
    Dataset train_set = load_jsonl(train_path);
    Dataset dev_set = dev_path.empty() ? Dataset{} : load_jsonl(dev_path);
    std::ofstream metrics_out;
    if (!metrics_path.empty()) {
        metrics_out.open(metrics_path);
        if (!metrics_out) throw IoError("cannot write " + metrics_path);
    }
    TrainResult result = train(cfg, train_set, dev_set, [&](const EpochMetrics& m) {
        std::string line = metrics_json(m).dump();
        std::cout << line << "\n" << std::flush;
        if (metrics_out) metrics_out << line << "\n";
    });
    save_model(out_path, result.best);
    std::cerr << "best dev F1 " << result.best.dev_f1 << " at epoch " << result.best.epoch
              << "; model written to " << out_path << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input_path,
                const std::string& output_path, double decode_penalty, bool local) {
    Checkpoint ckpt = load_model(model_path);
    Dataset input = load_jsonl(input_path, true);
    DecodeOptions opts;
    opts.penalty_c = decode_penalty;
    opts.local = local;
    Dataset output;
    output.reserve(input.size());
    for (const auto& r : input) output.push_back(predict_record(ckpt.model, r, opts));
    save_jsonl(output_path, output);
    return 0;
}

int cmd_evaluate(const std::string& gold_path, const std::string& pred_path) {
    Dataset gold = load_jsonl(gold_path);
    Dataset pred = load_jsonl(pred_path, true);
    EvalReport rep = metrics_f1(pred, gold);
    std::printf("precision %.4f\n", rep.precision);
    std::printf("recall %.4f\n", rep.recall);
    std::printf("f1 %.4f\n", rep.f1);
    if (rep.head_accuracy)
        std::printf("head_accuracy %.4f\n", *rep.head_accuracy);
    else
        std::printf("head_accuracy n/a\n");
    std::printf("shared_head_count %d\n", rep.shared_head_count);
    std::printf("units gold %ld pred %ld matched %ld\n", rep.gold_units, rep.pred_units,
                rep.tp);
    if (!rep.confusion.empty()) {
        std::printf("confusion (gold row -> predicted column, (miss) = unrecognized):\n");
        for (const auto& [row, cols] : rep.confusion) {
            std::printf("  %-10s", row.c_str());
            for (const auto& [col, count] : cols)
                std::printf(" %s:%ld", col.c_str(), count);
            std::printf("\n");
        }
    }
    return 0;
}

std::string tree_to_string(const LexTree& tree, const std::vector<std::string>& tokens) {
    std::string out;
    std::function<void(int, int)> rec = [&](int i, int j) {
        int head = -1, label = 0;
        for (const auto& c : tree.constituents)
            if (c.start == i && c.end == j) {
                head = c.head;
                label = c.label;
            }
        out += "(";
        out += label == 0 ? "_" : "E";
        out += "/" + tokens[static_cast<size_t>(head)] + " ";
        if (i == j) {
            out += tokens[static_cast<size_t>(i)];
        } else {
            for (int r = i; r < j; ++r) {
                bool left = false, right = false;
                for (const auto& c : tree.constituents) {
                    if (c.start == i && c.end == r) left = true;
                    if (c.start == r + 1 && c.end == j) right = true;
                }
                if (left && right) {
                    rec(i, r);
                    out += " ";
                    rec(r + 1, j);
                    break;
                }
            }
        }
        out += ")";
    };
    rec(0, tree.n - 1);
    return out;
}

int cmd_inspect(const std::string& input_path, int index, const std::string& model_path,
                double decode_penalty) {
    Dataset input = load_jsonl(input_path);
    if (index < 0 || index >= static_cast<int>(input.size()))
        throw InvalidInput("sentence index out of range");
    const Record& rec = input[static_cast<size_t>(index)];
    const int n = static_cast<int>(rec.tokens.size());

    ScoreSet scores(n, 2, 0.0);
    std::unique_ptr<Checkpoint> ckpt;
    LossConfig loss_cfg;
    if (!model_path.empty()) {
        ckpt = std::make_unique<Checkpoint>(load_model(model_path));
        Scorer scorer(ckpt->model.cfg, ckpt->model.params);
        scores = scorer.score(ckpt->model.vocab.ids(rec.tokens));
        loss_cfg = ckpt->model.loss_cfg;
    }

    std::printf("tokens (%d):", n);
    for (const auto& t : rec.tokens) std::printf(" %s", t.c_str());
    std::printf("\n");

    Chart free_chart = inside_eisner_satta(scores, loss_cfg.scheme);
    Marginals free_m = backward_marginals(free_chart, scores);
    std::printf("log Z (free): %.6f\n", free_chart.root);

    if (!rec.entities.empty()) {
        std::map<std::string, int> label_ids;
        if (ckpt) {
            for (size_t k = 0; k < ckpt->model.labels.size(); ++k)
                label_ids[ckpt->model.labels[k]] = static_cast<int>(k);
        } else {
            for (const auto& e : rec.entities)
                for (const auto& l : e.labels)
                    if (!label_ids.count(l)) label_ids[l] = static_cast<int>(label_ids.size());
        }
        std::unordered_map<std::string, int> idx(label_ids.begin(), label_ids.end());
        EntitySet gold = to_entity_set(rec, idx);
        MaskPlan mask = build_mask(gold, n, true, loss_cfg.scheme, scores.channels);
        Chart masked_chart = inside_eisner_satta(scores, loss_cfg.scheme, &mask);
        Marginals masked_m = backward_marginals(masked_chart, scores);
        std::printf("log numerator (masked): %.6f\n", masked_chart.root);
        std::printf("tree loss: %.6f\n", free_chart.root - masked_chart.root);
        for (const auto& e : gold.spans) {
            std::printf("alpha[%d,%d]:", e.start, e.end);
            auto alpha = masked_m.head_alpha(e.start, e.end);
            for (int h = e.start; h <= e.end; ++h)
                std::printf(" %s=%.4f", rec.tokens[static_cast<size_t>(h)].c_str(),
                            alpha[h - e.start]);
            std::printf("\n");
        }
    }

    std::printf("span marginals (free, top 5):\n");
    std::vector<std::tuple<double, int, int>> spans;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) spans.push_back({free_m.span_total_at(i, j), i, j});
    std::sort(spans.rbegin(), spans.rend());
    for (size_t k = 0; k < spans.size() && k < 5; ++k) {
        auto [mu, i, j] = spans[k];
        std::printf("  (%d,%d) mu=%.4f entity-channel=%.4f\n", i, j, mu,
                    free_m.span_at(i, j, 1));
    }

    Penalty pen;
    const Penalty* pen_ptr = nullptr;
    if (decode_penalty > 0 && scores.channels == 2) {
        pen = entity_candidate_penalty(scores, decode_penalty);
        pen_ptr = &pen;
    }
    LexTree tree = viterbi_lexicalized(scores, loss_cfg.scheme, pen_ptr);
    std::printf("viterbi score: %.6f\n", tree.score);
    std::printf("viterbi tree: %s\n", tree_to_string(tree, rec.tokens).c_str());
    std::printf("arcs:");
    for (const auto& a : tree.arcs)
        std::printf(" %s->%s",
                    a.parent == n ? "ROOT"
                                  : rec.tokens[static_cast<size_t>(a.parent)].c_str(),
                    rec.tokens[static_cast<size_t>(a.child)].c_str());
    std::printf("\n");

    if (ckpt) {
        DecodeOptions opts;
        opts.penalty_c = decode_penalty;
        Record pred = predict_record(ckpt->model, rec, opts);
        std::printf("prediction: %s\n", record_to_json(pred).dump().c_str());
    }
    return 0;
}

int cmd_synth(const std::string& out_dir, const SynthOptions& opt) {
    std::filesystem::create_directories(out_dir);
    SynthCorpus corpus = generate_synthetic_corpus(opt);
    save_jsonl(out_dir + "/train.jsonl", corpus.train);
    save_jsonl(out_dir + "/dev.jsonl", corpus.dev);
    save_jsonl(out_dir + "/test.jsonl", corpus.test);
    std::printf("wrote %zu/%zu/%zu sentences to %s (nested fraction %.2f)\n",
                corpus.train.size(), corpus.dev.size(), corpus.test.size(), out_dir.c_str(),
                nested_fraction(corpus.train));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lexicalized tree-CRF engine for nested named entity recognition"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
    std::string config_path, train_path, dev_path, out_path = "model.bin", metrics_path;
    train_cmd->add_option("--config", config_path, "key=value hyperparameter file");
    train_cmd->add_option("--train", train_path, "training JSONL")->required();
    train_cmd->add_option("--dev", dev_path, "development JSONL for model selection");
    train_cmd->add_option("--out", out_path, "output model path");
    train_cmd->add_option("--metrics", metrics_path, "per-epoch metrics JSONL file");

    auto* predict_cmd = app.add_subcommand("predict", "annotate a JSONL file");
    std::string model_path, input_path, output_path;
    double decode_penalty = 0.0;
    bool local_decode = false;
    predict_cmd->add_option("--model", model_path, "trained model")->required();
    predict_cmd->add_option("--input", input_path, "input JSONL")->required();
    predict_cmd->add_option("--output", output_path, "output JSONL")->required();
    predict_cmd->add_option("--decode-penalty", decode_penalty,
                            "decode-time exclusive-head constant (0 = off)");
    predict_cmd->add_flag("--local", local_decode, "span-local decoding without a tree");

    auto* eval_cmd = app.add_subcommand("evaluate", "compare predictions against gold");
    std::string gold_path, pred_path;
    eval_cmd->add_option("--gold", gold_path, "gold JSONL")->required();
    eval_cmd->add_option("--pred", pred_path, "predicted JSONL")->required();

    auto* inspect_cmd = app.add_subcommand("inspect", "charts and trees for one sentence");
    std::string inspect_input, inspect_model;
    int inspect_index = 0;
    double inspect_penalty = 0.0;
    inspect_cmd->add_option("--input", inspect_input, "JSONL file")->required();
    inspect_cmd->add_option("--index", inspect_index, "sentence index");
    inspect_cmd->add_option("--model", inspect_model,
                            "trained model (zero scores when omitted)");
    inspect_cmd->add_option("--decode-penalty", inspect_penalty,
                            "decode-time exclusive-head constant");

    auto* synth_cmd = app.add_subcommand("synth", "emit a synthetic corpus");
    std::string synth_dir = "synth";
    SynthOptions synth_opt;
    synth_cmd->add_option("--out-dir", synth_dir, "output directory");
    synth_cmd->add_option("--seed", synth_opt.seed, "generator seed");
    synth_cmd->add_option("--train", synth_opt.train, "training sentences");
    synth_cmd->add_option("--dev", synth_opt.dev, "development sentences");
    synth_cmd->add_option("--test", synth_opt.test, "test sentences");
    synth_cmd->add_option("--max-len", synth_opt.max_len, "maximum sentence length");
    synth_cmd->add_option("--nested-prob", synth_opt.nested_prob,
                          "chance an entity NP embeds another");

    auto* check_cmd =
        app.add_subcommand("oracle-check", "run the randomized property suite");
    lexcrf::CheckOptions check_opt;
    check_cmd->add_option("--n-max", check_opt.n_max, "maximum sentence length (<= 7)");
    check_cmd->add_option("--trials", check_opt.trials, "number of random fixtures");
    check_cmd->add_option("--seed", check_opt.seed, "fixture seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train_cmd)
            return cmd_train(config_path, train_path, dev_path, out_path, metrics_path);
        if (*predict_cmd)
            return cmd_predict(model_path, input_path, output_path, decode_penalty,
                               local_decode);
        if (*eval_cmd) return cmd_evaluate(gold_path, pred_path);
        if (*inspect_cmd)
            return cmd_inspect(inspect_input, inspect_index, inspect_model, inspect_penalty);
        if (*synth_cmd) return cmd_synth(synth_dir, synth_opt);
        if (*check_cmd) return lexcrf::run_oracle_checks(check_opt, std::cout) ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
