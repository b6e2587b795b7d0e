// End-to-end exercises of the command-line binary. Run with the binary path
// as the only argument; returns non-zero on the first failure.
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

int failures = 0;

#define CHECK_MSG(cond, msg)                                              \
    do {                                                                  \
        if (!(cond)) {                                                    \
            std::cerr << "FAIL " << __LINE__ << ": " << msg << "\n";      \
            ++failures;                                                   \
        }                                                                 \
    } while (0)

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& cmd) {
    RunResult res;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return res;
    std::array<char, 4096> buf;
    while (fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <path-to-lexcrf-binary>\n";
        return 2;
    }
    const std::string bin = argv[1];
    const std::string dir = "/tmp/lexcrf_cli_test";
    run("rm -rf " + dir);
    run("mkdir -p " + dir);

    // unknown flags exit with the usage code
    {
        RunResult r = run(bin + " evaluate --no-such-flag");
        CHECK_MSG(r.exit_code == 2, "unknown flag should exit 2, got " << r.exit_code);
        r = run(bin + " frobnicate");
        CHECK_MSG(r.exit_code == 2, "unknown subcommand should exit 2");
        r = run(bin + " --help");
        CHECK_MSG(r.exit_code == 0, "--help should exit 0");
    }

    // synth writes the three splits
    {
        RunResult r = run(bin + " synth --out-dir " + dir + " --train 80 --dev 20 --test 20");
        CHECK_MSG(r.exit_code == 0, "synth failed: " << r.output);
        std::ifstream f(dir + "/train.jsonl");
        CHECK_MSG(f.good(), "train.jsonl missing");
    }

    // evaluate a file against itself
    {
        RunResult r = run(bin + " evaluate --gold " + dir + "/dev.jsonl --pred " + dir +
                          "/dev.jsonl");
        CHECK_MSG(r.exit_code == 0, "evaluate failed: " << r.output);
        CHECK_MSG(contains(r.output, "f1 1.0000"), "self-evaluation must give F1 1: "
                                                       << r.output);
    }

    // missing file is a runtime error
    {
        RunResult r = run(bin + " evaluate --gold " + dir + "/nope.jsonl --pred " + dir +
                          "/dev.jsonl");
        CHECK_MSG(r.exit_code == 1, "missing file should exit 1, got " << r.exit_code);
    }

    // train a small model from a config file
    {
        std::ofstream cfg(dir + "/train.cfg");
        cfg << "# small smoke-test configuration\n"
            << "epochs = 6\n"
            << "batch_size = 16\n"
            << "warmup_epochs = 1\n"
            << "seed = 3\n"
            << "d_emb = 24\nd_hidden = 24\nk_span = 24\nk_arc = 24\nk_label = 16\n";
        cfg.close();
        RunResult r = run(bin + " train --config " + dir + "/train.cfg --train " + dir +
                          "/train.jsonl --dev " + dir + "/dev.jsonl --out " + dir +
                          "/model.bin --metrics " + dir + "/metrics.jsonl");
        CHECK_MSG(r.exit_code == 0, "train failed: " << r.output);
        CHECK_MSG(contains(r.output, "\"dev_f1\""), "metrics lines on stdout");
        std::ifstream metrics(dir + "/metrics.jsonl");
        int lines = 0;
        std::string line;
        while (std::getline(metrics, line)) ++lines;
        CHECK_MSG(lines == 6, "expected 6 metric lines, got " << lines);
    }

    // bad config key
    {
        std::ofstream cfg(dir + "/bad.cfg");
        cfg << "eposh = 3\n";
        cfg.close();
        RunResult r = run(bin + " train --config " + dir + "/bad.cfg --train " + dir +
                          "/train.jsonl --out " + dir + "/m2.bin");
        CHECK_MSG(r.exit_code == 1, "unknown config key should exit 1");
        CHECK_MSG(contains(r.output, "unknown key"), "error names the bad key");
    }

    // predict on the test split and evaluate
    {
        RunResult r = run(bin + " predict --model " + dir + "/model.bin --input " + dir +
                          "/test.jsonl --output " + dir + "/pred.jsonl");
        CHECK_MSG(r.exit_code == 0, "predict failed: " << r.output);
        r = run(bin + " evaluate --gold " + dir + "/test.jsonl --pred " + dir +
                "/pred.jsonl");
        CHECK_MSG(r.exit_code == 0, "evaluate on predictions failed: " << r.output);
        CHECK_MSG(contains(r.output, "precision"), "report printed");
    }

    // predict with the decode-time constraint enabled
    {
        RunResult r = run(bin + " predict --model " + dir + "/model.bin --input " + dir +
                          "/test.jsonl --output " + dir + "/pred_pen.jsonl "
                          "--decode-penalty 0.4");
        CHECK_MSG(r.exit_code == 0, "penalized predict failed: " << r.output);
    }

    // span-local decoding may emit crossing spans; evaluation must accept them
    {
        RunResult r = run(bin + " predict --model " + dir + "/model.bin --input " + dir +
                          "/test.jsonl --output " + dir + "/pred_local.jsonl --local");
        CHECK_MSG(r.exit_code == 0, "local predict failed: " << r.output);
        r = run(bin + " evaluate --gold " + dir + "/test.jsonl --pred " + dir +
                "/pred_local.jsonl");
        CHECK_MSG(r.exit_code == 0, "evaluate on local predictions failed: " << r.output);
    }

    // predict on an empty file gives an empty file
    {
        std::ofstream(dir + "/empty.jsonl").close();
        RunResult r = run(bin + " predict --model " + dir + "/model.bin --input " + dir +
                          "/empty.jsonl --output " + dir + "/empty_out.jsonl");
        CHECK_MSG(r.exit_code == 0, "empty predict failed");
        std::ifstream out(dir + "/empty_out.jsonl");
        std::string all((std::istreambuf_iterator<char>(out)),
                        std::istreambuf_iterator<char>());
        CHECK_MSG(all.empty(), "empty input must give empty output");
    }

    // inspect with and without a model
    {
        // pick a sentence that has gold entities so the head distributions print
        int index = -1;
        {
            std::ifstream dev(dir + "/dev.jsonl");
            std::string line;
            for (int k = 0; std::getline(dev, line); ++k)
                if (contains(line, "\"start\"")) {
                    index = k;
                    break;
                }
        }
        CHECK_MSG(index >= 0, "dev set should contain entities");
        const std::string at = " --index " + std::to_string(index);
        RunResult r = run(bin + " inspect --input " + dir + "/dev.jsonl" + at);
        CHECK_MSG(r.exit_code == 0, "inspect failed: " << r.output);
        CHECK_MSG(contains(r.output, "log Z"), "inspect prints the partition value");
        CHECK_MSG(contains(r.output, "viterbi tree"), "inspect prints the tree");
        r = run(bin + " inspect --input " + dir + "/dev.jsonl" + at + " --model " + dir +
                "/model.bin");
        CHECK_MSG(r.exit_code == 0, "inspect with model failed: " << r.output);
        CHECK_MSG(contains(r.output, "alpha["), "inspect prints head distributions");
        r = run(bin + " inspect --input " + dir + "/dev.jsonl --index 99999");
        CHECK_MSG(r.exit_code == 1, "out-of-range index should exit 1");
    }

    // the randomized property suite
    {
        RunResult r = run(bin + " oracle-check --n-max 4 --trials 30");
        CHECK_MSG(r.exit_code == 0, "oracle-check failed: " << r.output);
        CHECK_MSG(!contains(r.output, "FAIL"), "oracle-check reported failures");
    }

    if (failures == 0) {
        std::cout << "cli tests passed\n";
        return 0;
    }
    std::cerr << failures << " cli test(s) failed\n";
    return 1;
}
