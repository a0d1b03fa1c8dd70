#include <doctest.h>

#include "cli.hpp"
#include "scproj/classifier.hpp"
#include "testutil.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace scproj;
using namespace testutil;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full = {"scproj"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& arg : full) argv.push_back(arg.c_str());

    std::ostringstream captured_out, captured_err;
    auto* old_out = std::cout.rdbuf(captured_out.rdbuf());
    auto* old_err = std::cerr.rdbuf(captured_err.rdbuf());
    CliResult result;
    try {
        result.code = cli_main(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    result.out = captured_out.str();
    result.err = captured_err.str();
    return result;
}

// Tiny but separable dataset written to <prefix>.{matrix,labels,manifest}.csv.
void make_dataset(const std::string& prefix, const std::string& extra_flags = "") {
    std::vector<std::string> args = {"synth",   "--out",         prefix,
                                     "--classes", "25,25",       "--genes",
                                     "30",      "--informative", "8",
                                     "--separation", "9",        "--seed",
                                     "3"};
    if (!extra_flags.empty()) {
        std::istringstream stream(extra_flags);
        std::string token;
        while (stream >> token) args.push_back(token);
    }
    REQUIRE(run_cli(args).code == 0);
}

std::vector<std::string> quick_train_flags() {
    return {"--hvg",    "15", "--pcs",        "3",  "--hidden", "8",
            "--epochs", "6",  "--batch-size", "16", "--seed",   "2"};
}

int count_lines(const std::string& text) {
    return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("help exits zero and usage errors exit two") {
    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({"train", "--help"}).code == 0);

    CHECK(run_cli({}).code == 2);                          // missing subcommand
    CHECK(run_cli({"transmogrify"}).code == 2);            // unknown subcommand
    CHECK(run_cli({"train"}).code == 2);                   // missing required flags
    CHECK(run_cli({"synth", "--out", "x", "--bogus"}).code == 2);  // unknown flag

    const auto missing = run_cli({"train"});
    CHECK(missing.err.find("error:") == 0);
    CHECK(count_lines(missing.err) == 1);  // single-line diagnostics
}

TEST_CASE("runtime failures exit one with a single-line error") {
    const TempDir dir;
    const auto result = run_cli({"predict", "--model", dir.file("absent.bin"),
                                 "--query", dir.file("absent.csv"), "--out",
                                 dir.file("out.csv")});
    CHECK(result.code == 1);
    CHECK(result.err.find("error:") == 0);
    CHECK(count_lines(result.err) == 1);
}

TEST_CASE("synth emits matrix, labels, and manifest deterministically") {
    const TempDir dir;
    make_dataset(dir.file("a"));
    make_dataset(dir.file("b"));

    const std::string matrix = read_text(dir.file("a.matrix.csv"));
    CHECK(matrix == read_text(dir.file("b.matrix.csv")));
    CHECK(read_text(dir.file("a.labels.csv")) == read_text(dir.file("b.labels.csv")));

    // genes-as-rows default: 30 gene rows + 1 header row of cell ids
    CHECK(count_lines(matrix) == 31);
    CHECK(read_text(dir.file("a.labels.csv")).find("cell_000000,class_00") !=
          std::string::npos);

    const std::string manifest = read_text(dir.file("a.manifest.csv"));
    CHECK(manifest.find("# command=synth") == 0);
    CHECK(manifest.find("# seed=3") != std::string::npos);
    CHECK(manifest.find(".matrix.csv,matrix") != std::string::npos);
    CHECK(manifest.find(".labels.csv,labels") != std::string::npos);
}

TEST_CASE("training is reproducible byte for byte") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    auto train = [&](const std::string& out) {
        std::vector<std::string> args = {"train",        "--ref-matrix",
                                         dir.file("data.matrix.csv"),
                                         "--ref-labels", dir.file("data.labels.csv"),
                                         "--out",        out};
        const auto quick = quick_train_flags();
        args.insert(args.end(), quick.begin(), quick.end());
        return run_cli(args);
    };
    REQUIRE(train(dir.file("m1.bin")).code == 0);
    REQUIRE(train(dir.file("m2.bin")).code == 0);
    CHECK(read_text(dir.file("m1.bin")) == read_text(dir.file("m2.bin")));

    // the loss curve carries the effective config echo
    const std::string loss = read_text(dir.file("m1.bin.loss.csv"));
    CHECK(loss.find("# command=train") == 0);
    CHECK(loss.find("# pcs=3") != std::string::npos);
    CHECK(loss.find("# epochs=6") != std::string::npos);
    CHECK(loss.find("epoch,train_loss,val_loss") != std::string::npos);
}

TEST_CASE("a discriminant-only pipeline trains and predicts") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    std::vector<std::string> args = {"train",        "--ref-matrix",
                                     dir.file("data.matrix.csv"),
                                     "--ref-labels", dir.file("data.labels.csv"),
                                     "--out",        dir.file("mda.bin"),
                                     "--pcs",        "0"};
    for (const auto& flag : quick_train_flags()) {
        if (flag == "--pcs") break;  // keep the explicit zero
    }
    const auto quick = quick_train_flags();
    // drop the "--pcs 3" pair from the quick flags
    for (std::size_t i = 0; i < quick.size(); ++i) {
        if (quick[i] == "--pcs") {
            ++i;
            continue;
        }
        args.push_back(quick[i]);
    }
    REQUIRE(run_cli(args).code == 0);

    const auto pipeline = load_pipeline(dir.file("mda.bin"));
    CHECK(pipeline.basis.pca.n_components() == 0);
    CHECK(pipeline.basis.dim() == 2);  // one discriminant column per class

    const auto result =
        run_cli({"predict", "--model", dir.file("mda.bin"), "--query",
                 dir.file("data.matrix.csv"), "--out", dir.file("pred.csv")});
    CHECK(result.code == 0);
    CHECK(count_lines(read_text(dir.file("pred.csv"))) > 50);
}

TEST_CASE("predict writes the documented columns and is deterministic") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    std::vector<std::string> args = {"train",        "--ref-matrix",
                                     dir.file("data.matrix.csv"),
                                     "--ref-labels", dir.file("data.labels.csv"),
                                     "--out",        dir.file("m.bin")};
    const auto quick = quick_train_flags();
    args.insert(args.end(), quick.begin(), quick.end());
    REQUIRE(run_cli(args).code == 0);

    auto predict_cmd = [&](const std::string& out, bool probs) {
        std::vector<std::string> p = {"predict", "--model", dir.file("m.bin"),
                                      "--query", dir.file("data.matrix.csv"),
                                      "--out",   out};
        if (probs) p.push_back("--probs");
        return run_cli(p);
    };
    REQUIRE(predict_cmd(dir.file("p1.csv"), false).code == 0);
    REQUIRE(predict_cmd(dir.file("p2.csv"), false).code == 0);
    auto without_out_echo = [](const std::string& text) {
        std::string kept;
        std::istringstream stream(text);
        std::string line;
        while (std::getline(stream, line)) {
            if (line.rfind("# out=", 0) == 0) continue;
            kept += line;
            kept += '\n';
        }
        return kept;
    };
    CHECK(without_out_echo(read_text(dir.file("p1.csv"))) ==
          without_out_echo(read_text(dir.file("p2.csv"))));

    const std::string plain = read_text(dir.file("p1.csv"));
    CHECK(plain.find("# command=predict") == 0);
    CHECK(plain.find("cell_id,predicted_label,max_probability\n") !=
          std::string::npos);
    CHECK(plain.find("cell_000000,") != std::string::npos);
    // 50 cells + header; echo lines all start with '#'
    CHECK(count_lines(plain) >= 51);

    REQUIRE(predict_cmd(dir.file("p3.csv"), true).code == 0);
    const std::string with_probs = read_text(dir.file("p3.csv"));
    CHECK(with_probs.find(
              "cell_id,predicted_label,max_probability,class_00,class_01\n") !=
          std::string::npos);
}

TEST_CASE("evaluate writes four reports with the effective config echoed") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    auto evaluate = [&](const std::string& out, bool timing) {
        std::vector<std::string> args = {
            "evaluate",     "--ref-matrix", dir.file("data.matrix.csv"),
            "--ref-labels", dir.file("data.labels.csv"),
            "--out",        out,            "--split-seed", "4"};
        const auto quick = quick_train_flags();
        args.insert(args.end(), quick.begin(), quick.end());
        if (timing) args.push_back("--with-timing");
        return run_cli(args);
    };
    REQUIRE(evaluate(dir.file("r1"), false).code == 0);
    REQUIRE(evaluate(dir.file("r2"), false).code == 0);

    for (const char* suffix :
         {".txt", ".jsonl", ".per_class.csv", ".confusion.csv"}) {
        CAPTURE(suffix);
        const std::string first = read_text(dir.file("r1") + suffix);
        CHECK(first.find("# command=evaluate") == 0);
        CHECK(first.find("# split-seed=4") != std::string::npos);
        // identical bytes only because timing is excluded by default
        std::string second = read_text(dir.file("r2") + suffix);
        const auto fix = second.find("/r2");
        while (second.find("/r2") != std::string::npos) {
            second.replace(second.find("/r2"), 3, "/r1");
        }
        CHECK(first == second);
        (void)fix;
    }
    CHECK(read_text(dir.file("r1.txt")).find("accuracy ") != std::string::npos);
    CHECK(read_text(dir.file("r1.txt")).find("predict_seconds") ==
          std::string::npos);

    REQUIRE(evaluate(dir.file("r3"), true).code == 0);
    CHECK(read_text(dir.file("r3.txt")).find("predict_seconds") !=
          std::string::npos);
}

TEST_CASE("sweep writes one row per grid value and parallelism changes nothing") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    auto sweep = [&](const std::string& out, const std::string& jobs) {
        std::vector<std::string> args = {
            "sweep",        "--ref-matrix", dir.file("data.matrix.csv"),
            "--ref-labels", dir.file("data.labels.csv"),
            "--out",        out,            "--pcs",        "0,2,4",
            "--jobs",       jobs,           "--split-seed", "4"};
        for (const auto& flag : std::vector<std::string>{
                 "--hvg", "15", "--hidden", "8", "--epochs", "6", "--batch-size",
                 "16", "--seed", "2"}) {
            args.push_back(flag);
        }
        return run_cli(args);
    };
    REQUIRE(sweep(dir.file("s1.csv"), "1").code == 0);
    REQUIRE(sweep(dir.file("s2.csv"), "2").code == 0);

    const std::string csv = read_text(dir.file("s1.csv"));
    CHECK(csv.find("# command=sweep") == 0);
    CHECK(csv.find("n_pcs,accuracy,macro_f1\n") != std::string::npos);
    CHECK(csv.find("\n0,") != std::string::npos);
    CHECK(csv.find("\n2,") != std::string::npos);
    CHECK(csv.find("\n4,") != std::string::npos);

    // strip the differing --jobs echo line before comparing
    auto body = [](std::string text) {
        std::string out;
        std::istringstream stream(text);
        std::string line;
        while (std::getline(stream, line)) {
            if (line.rfind("# jobs=", 0) == 0 || line.rfind("# out=", 0) == 0) {
                continue;
            }
            out += line;
            out += '\n';
        }
        return out;
    };
    CHECK(body(csv) == body(read_text(dir.file("s2.csv"))));
}

TEST_CASE("bench reports each sample and their median") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    std::vector<std::string> args = {"train",        "--ref-matrix",
                                     dir.file("data.matrix.csv"),
                                     "--ref-labels", dir.file("data.labels.csv"),
                                     "--out",        dir.file("m.bin")};
    const auto quick = quick_train_flags();
    args.insert(args.end(), quick.begin(), quick.end());
    REQUIRE(run_cli(args).code == 0);

    const auto result = run_cli({"bench", "--model", dir.file("m.bin"), "--query",
                                 dir.file("data.matrix.csv"), "--out",
                                 dir.file("t.csv")});
    REQUIRE(result.code == 0);
    const std::string csv = read_text(dir.file("t.csv"));
    CHECK(csv.find("# command=bench") == 0);
    CHECK(csv.find("# repeats=5") != std::string::npos);
    CHECK(csv.find("sample,seconds\n") != std::string::npos);
    for (int i = 1; i <= 5; ++i) {
        CHECK(csv.find("\n" + std::to_string(i) + ",") != std::string::npos);
    }
    CHECK(csv.find("\nmedian,") != std::string::npos);

    CHECK(run_cli({"bench", "--model", dir.file("m.bin"), "--query",
                   dir.file("data.matrix.csv"), "--out", dir.file("t2.csv"),
                   "--repeats", "0"})
              .code == 1);
}

TEST_CASE("a corrupted model fails with a checksum complaint") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    std::vector<std::string> args = {"train",        "--ref-matrix",
                                     dir.file("data.matrix.csv"),
                                     "--ref-labels", dir.file("data.labels.csv"),
                                     "--out",        dir.file("m.bin")};
    const auto quick = quick_train_flags();
    args.insert(args.end(), quick.begin(), quick.end());
    REQUIRE(run_cli(args).code == 0);

    std::string bytes = read_text(dir.file("m.bin"));
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
    write_text(dir.file("bad.bin"), bytes);

    const auto result = run_cli({"predict", "--model", dir.file("bad.bin"),
                                 "--query", dir.file("data.matrix.csv"), "--out",
                                 dir.file("p.csv")});
    CHECK(result.code == 1);
    CHECK(result.err.find("checksum") != std::string::npos);
}

TEST_CASE("config files supply defaults that explicit flags override") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    write_text(dir.file("train.cfg"),
               "# comment line\n"
               "hvg=15\n"
               "pcs = 3\n"
               "hidden=8\n"
               "epochs=6\n"
               "batch-size=16\n"
               "seed=2\n");

    auto train_with_config = [&](const std::string& out,
                                 const std::vector<std::string>& extra) {
        std::vector<std::string> args = {"train",
                                         "--config",
                                         dir.file("train.cfg"),
                                         "--ref-matrix",
                                         dir.file("data.matrix.csv"),
                                         "--ref-labels",
                                         dir.file("data.labels.csv"),
                                         "--out",
                                         out};
        args.insert(args.end(), extra.begin(), extra.end());
        return run_cli(args);
    };
    REQUIRE(train_with_config(dir.file("c1.bin"), {}).code == 0);
    CHECK(read_text(dir.file("c1.bin.loss.csv")).find("# epochs=6") !=
          std::string::npos);

    // a flag on the command line beats the config value
    REQUIRE(train_with_config(dir.file("c2.bin"), {"--epochs", "4"}).code == 0);
    CHECK(read_text(dir.file("c2.bin.loss.csv")).find("# epochs=4") !=
          std::string::npos);

    // config plus flags is equivalent to spelling everything out
    std::vector<std::string> spelled = {"train",        "--ref-matrix",
                                        dir.file("data.matrix.csv"),
                                        "--ref-labels", dir.file("data.labels.csv"),
                                        "--out",        dir.file("c3.bin")};
    const auto quick = quick_train_flags();
    spelled.insert(spelled.end(), quick.begin(), quick.end());
    REQUIRE(run_cli(spelled).code == 0);
    CHECK(read_text(dir.file("c1.bin")) == read_text(dir.file("c3.bin")));
}

TEST_CASE("bad config files are usage errors") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    const std::vector<std::string> tail = {
        "--ref-matrix", dir.file("data.matrix.csv"), "--ref-labels",
        dir.file("data.labels.csv"), "--out", dir.file("m.bin")};
    auto with_config = [&](const std::string& cfg) {
        std::vector<std::string> args = {"train", "--config", cfg};
        args.insert(args.end(), tail.begin(), tail.end());
        return run_cli(args);
    };

    CHECK(with_config(dir.file("missing.cfg")).code == 2);

    write_text(dir.file("bad.cfg"), "no equals sign here\n");
    CHECK(with_config(dir.file("bad.cfg")).code == 2);

    write_text(dir.file("unknown.cfg"), "warp-drive=on\n");
    CHECK(with_config(dir.file("unknown.cfg")).code == 2);

    write_text(dir.file("nested.cfg"), "config=other.cfg\n");
    CHECK(with_config(dir.file("nested.cfg")).code == 2);

    // --config without a subcommand cannot be resolved
    CHECK(run_cli({"--config", dir.file("bad.cfg")}).code == 2);
}

TEST_CASE("an echoed header reproduces the run that wrote it") {
    const TempDir dir;
    make_dataset(dir.file("data"));
    std::vector<std::string> args = {"train",        "--ref-matrix",
                                     dir.file("data.matrix.csv"),
                                     "--ref-labels", dir.file("data.labels.csv"),
                                     "--out",        dir.file("m1.bin")};
    const auto quick = quick_train_flags();
    args.insert(args.end(), quick.begin(), quick.end());
    REQUIRE(run_cli(args).code == 0);

    // turn the echoed "# key=value" lines back into a config file
    std::string config_text;
    std::istringstream stream(read_text(dir.file("m1.bin.loss.csv")));
    std::string line;
    while (std::getline(stream, line)) {
        if (line.rfind("# ", 0) != 0) break;
        config_text += line.substr(2);
        config_text += '\n';
    }
    write_text(dir.file("echo.cfg"), config_text);

    // out/loss-curve from the echo point at the old files; override both
    const auto rerun = run_cli({"train", "--config", dir.file("echo.cfg"),
                                "--out", dir.file("m2.bin"), "--loss-curve",
                                dir.file("m2.loss.csv")});
    REQUIRE(rerun.code == 0);
    CHECK(read_text(dir.file("m1.bin")) == read_text(dir.file("m2.bin")));
}
