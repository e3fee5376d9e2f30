#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include "cascademl/dataset.hpp"
#include "cascademl/rng.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

/// Run the CLI binary, capturing exit code and combined output.
RunResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out_file = scratch / "cli_output.txt";
    const std::string cmd =
        std::string(CASCADEML_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = testutil::read_file(out_file);
    return result;
}

/// Two-feature binary CSV where label is sign(f0).
void write_sign_csv(const fs::path& path, std::size_t n, std::uint64_t seed) {
    cml::Rng rng(seed);
    std::string csv = "f0,f1,label\n";
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = int(rng.below(2));
        const double f0 = rng.normal(cls ? 2.0 : -2.0, 0.5);
        const double f1 = rng.normal();
        csv += cml::format_double(f0) + "," + cml::format_double(f1) + "," +
               (cls ? "pos" : "neg") + "\n";
    }
    testutil::write_file(path, csv);
}

} // namespace

TEST_CASE("every subcommand offers --help") {
    TempDir dir;
    for (const std::string sub : {"split", "subsample", "select", "nas", "report"}) {
        const RunResult r = run_cli(sub + " --help", dir.path());
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("--") != std::string::npos);
    }
}

TEST_CASE("split copies a stratified partition and reports counts") {
    TempDir dir;
    testutil::make_class_dir(dir.path() / "data", "cats", 10);
    testutil::make_class_dir(dir.path() / "data", "dogs", 10);
    const std::string dest = (dir / "out").string();

    const RunResult r = run_cli("split --data-dir " + (dir / "data").string() + " --dest " +
                                    dest + " --train 0.7 --val 0.15 --test 0.15 --seed 42",
                                dir.path());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("train") != std::string::npos);

    std::size_t train_cats = 0;
    for ([[maybe_unused]] const auto& e :
         fs::directory_iterator(fs::path(dest) / "train" / "cats"))
        ++train_cats;
    CHECK(train_cats == 7);
}

TEST_CASE("split validation and io failures use distinct exit codes") {
    TempDir dir;
    testutil::make_class_dir(dir.path() / "data", "cats", 4);

    // ratios that do not sum to one: validation error, exit 2
    const RunResult bad_ratios =
        run_cli("split --data-dir " + (dir / "data").string() + " --dest " +
                    (dir / "out1").string() + " --train 0.5 --val 0.2 --test 0.2 --seed 1",
                dir.path());
    CHECK(bad_ratios.exit_code == 2);
    CHECK(bad_ratios.output.find("0.5") != std::string::npos);

    // nonempty destination: io error, exit 1
    testutil::write_file(dir / "busy" / "occupied.txt", "x");
    const RunResult busy =
        run_cli("split --data-dir " + (dir / "data").string() + " --dest " +
                    (dir / "busy").string() + " --train 0.7 --val 0.15 --test 0.15 --seed 1",
                dir.path());
    CHECK(busy.exit_code == 1);

    // missing required flag: exit 2
    const RunResult missing = run_cli("split --dest somewhere", dir.path());
    CHECK(missing.exit_code == 2);
}

TEST_CASE("subsample keeps floor fractions and validates the fraction") {
    TempDir dir;
    testutil::make_class_dir(dir.path() / "data", "a", 10);
    testutil::make_class_dir(dir.path() / "data", "b", 3);

    const RunResult half = run_cli("subsample --data-dir " + (dir / "data").string() +
                                       " --dest " + (dir / "half").string() +
                                       " --fraction 0.5 --seed 3",
                                   dir.path());
    CHECK(half.exit_code == 0);
    std::size_t a_files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "half" / "a"))
        ++a_files;
    CHECK(a_files == 5);

    const RunResult full = run_cli("subsample --data-dir " + (dir / "data").string() +
                                       " --dest " + (dir / "full").string() +
                                       " --fraction 1.0 --seed 3",
                                   dir.path());
    CHECK(full.exit_code == 0);
    std::size_t b_files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "full" / "b"))
        ++b_files;
    CHECK(b_files == 3);

    const RunResult zero = run_cli("subsample --data-dir " + (dir / "data").string() +
                                       " --dest " + (dir / "zero").string() +
                                       " --fraction 0 --seed 3",
                                   dir.path());
    CHECK(zero.exit_code == 2);
}

TEST_CASE("select applies a config-driven chain to a csv") {
    TempDir dir;
    // four features with variances 0, 1, 4, 9 (population), binary label
    std::string csv = "c0,c1,c2,c3,label\n";
    for (int i = 0; i < 4; ++i) {
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        csv += "5," + cml::format_double(sign) + "," + cml::format_double(2 * sign) + "," +
               cml::format_double(3 * sign) + "," + (i < 2 ? "u" : "v") + "\n";
    }
    testutil::write_file(dir / "in.csv", csv);

    SECTION("a keep-all config reproduces the input") {
        // no constant columns here, so a zero threshold keeps everything
        testutil::write_file(dir / "noconst.csv",
                             "c1,c2,c3,label\n1,2,3,u\n-1,-2,-3,u\n1,2,3,v\n-1,-2,-3,v\n");
        testutil::write_file(dir / "keep.json",
                             R"({"schema_version":1,"select":{"chain":[
                                  {"kind":"variance_threshold","threshold":0.0}]}})");
        const RunResult r = run_cli("select --in " + (dir / "noconst.csv").string() +
                                        " --label label --config " + (dir / "keep.json").string() +
                                        " --out " + (dir / "out.csv").string(),
                                    dir.path());
        CHECK(r.exit_code == 0);
        const cml::TabularDataset in = cml::load_csv((dir / "noconst.csv").string(), "label");
        const cml::TabularDataset out = cml::load_csv((dir / "out.csv").string(), "label");
        CHECK(out.feature_names == in.feature_names);
        CHECK(out.x.data() == in.x.data());
        CHECK(out.y == in.y);
    }

    SECTION("a constant column is dropped even by a zero threshold") {
        testutil::write_file(dir / "keep.json",
                             R"({"schema_version":1,"select":{"chain":[
                                  {"kind":"variance_threshold","threshold":0.0}]}})");
        const RunResult r = run_cli("select --in " + (dir / "in.csv").string() + " --label label "
                                        "--config " + (dir / "keep.json").string() + " --out " +
                                        (dir / "out.csv").string(),
                                    dir.path());
        CHECK(r.exit_code == 0);
        const cml::TabularDataset out = cml::load_csv((dir / "out.csv").string(), "label");
        CHECK(out.feature_names == std::vector<std::string>{"c1", "c2", "c3"});
    }

    SECTION("adaptive variance at percentile 50 keeps the upper half") {
        testutil::write_file(dir / "avt.json",
                             R"({"schema_version":1,"select":{"chain":[
                                  {"kind":"adaptive_variance","percentile":50}]}})");
        const RunResult r = run_cli("select --in " + (dir / "in.csv").string() + " --label label "
                                        "--config " + (dir / "avt.json").string() + " --out " +
                                        (dir / "out.csv").string(),
                                    dir.path());
        CHECK(r.exit_code == 0);
        // variances 0,1,4,9; percentile 50 -> threshold 2.5 -> keep c2, c3
        const cml::TabularDataset out = cml::load_csv((dir / "out.csv").string(), "label");
        CHECK(out.feature_names == std::vector<std::string>{"c2", "c3"});
        CHECK(r.output.find("c2") != std::string::npos);
        CHECK(r.output.find("c3") != std::string::npos);
    }

    SECTION("an oversized k is a config error") {
        testutil::write_file(dir / "bigk.json",
                             R"({"schema_version":1,"select":{"chain":[
                                  {"kind":"select_k_best","score_fn":"f_classif","k":99}]}})");
        const RunResult r = run_cli("select --in " + (dir / "in.csv").string() + " --label label "
                                        "--config " + (dir / "bigk.json").string() + " --out " +
                                        (dir / "out.csv").string(),
                                    dir.path());
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("k exceeds feature count") != std::string::npos);
    }

    SECTION("a chain that rejects everything exits 3") {
        std::string flat = "c0,c1,label\n1,2,u\n1,2,v\n";
        testutil::write_file(dir / "flat.csv", flat);
        testutil::write_file(dir / "vt.json",
                             R"({"schema_version":1,"select":{"chain":[
                                  {"kind":"variance_threshold","threshold":0.0}]}})");
        const RunResult r = run_cli("select --in " + (dir / "flat.csv").string() +
                                        " --label label --config " + (dir / "vt.json").string() +
                                        " --out " + (dir / "out.csv").string(),
                                    dir.path());
        CHECK(r.exit_code == 3);
        CHECK(r.output.find("no features survive") != std::string::npos);
    }

    SECTION("unknown config keys are rejected") {
        testutil::write_file(dir / "typo.json",
                             R"({"schema_version":1,"select":{"chain":[
                                  {"kind":"variance_threshold","treshold":0.0}]}})");
        const RunResult r = run_cli("select --in " + (dir / "in.csv").string() + " --label label "
                                        "--config " + (dir / "typo.json").string() + " --out " +
                                        (dir / "out.csv").string(),
                                    dir.path());
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("unknown key") != std::string::npos);
    }

    SECTION("a mixed chain of adaptive variance and rank aggregation works") {
        testutil::write_file(dir / "mix.json",
                             R"({"schema_version":1,"select":{"chain":[
                                  {"kind":"adaptive_variance","percentile":1.5},
                                  {"kind":"rank_aggregated","k":2,"methods":[
                                    {"kind":"select_k_best","score_fn":"f_classif","k":2},
                                    {"kind":"select_k_best","score_fn":"mutual_info","k":2}
                                  ]}]}})");
        const RunResult r = run_cli("select --in " + (dir / "in.csv").string() + " --label label "
                                        "--config " + (dir / "mix.json").string() + " --out " +
                                        (dir / "out.csv").string(),
                                    dir.path());
        CHECK(r.exit_code == 0);
        const cml::TabularDataset out = cml::load_csv((dir / "out.csv").string(), "label");
        CHECK(out.x.cols() == 2);
    }
}

namespace {

std::string nas_config_json(int layers, const std::string& pca_variance, int epochs,
                            std::uint64_t seed) {
    return std::string("{\"schema_version\":1,\"nas\":{") + "\"layers\":" +
           std::to_string(layers) + ",\"pca_variance\":" + pca_variance +
           ",\"normalize\":true,\"unit\":true,\"activation\":\"relu\",\"dropout\":0.0," +
           "\"l2\":0.0,\"batch_norm\":false,\"init\":\"he_normal\",\"output_neurons\":1," +
           "\"out_activation\":\"sigmoid\",\"val_fraction\":0.25,\"seed\":" +
           std::to_string(seed) + ",\"train\":{\"epochs\":" + std::to_string(epochs) +
           ",\"batch_size\":16,\"loss\":\"binary_crossentropy\",\"optimizer\":\"adam\"," +
           "\"learn_rate\":0.01,\"stop_criteria\":\"val_loss\",\"es_mode\":\"min\"," +
           "\"es_patience\":" + std::to_string(epochs) + ",\"metrics\":[\"accuracy\"]," +
           "\"verbose\":0}}}";
}

} // namespace

TEST_CASE("nas builds a model and writes width and curve reports") {
    TempDir dir;
    write_sign_csv(dir / "train.csv", 80, 11);
    testutil::write_file(dir / "nas.json", nas_config_json(1, "0.95", 3, 5));

    const std::string args = "nas --train " + (dir / "train.csv").string() +
                             " --label label --config " + (dir / "nas.json").string() +
                             " --out-model " + (dir / "model.cmnet").string() +
                             " --report-dir " + (dir / "report").string();
    const RunResult r = run_cli(args, dir.path());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "model.cmnet"));
    CHECK(fs::exists(dir / "report" / "widths.tsv"));
    CHECK(fs::exists(dir / "report" / "variance_curves.tsv"));
    CHECK(fs::exists(dir / "report" / "final_history.tsv"));
    CHECK(fs::exists(dir / "report" / "final_history.svg"));

    const std::string widths = testutil::read_file(dir / "report" / "widths.tsv");
    CHECK(widths.find("stage\twidth") != std::string::npos);

    SECTION("the same seed reproduces every report byte") {
        const std::string args2 = "nas --train " + (dir / "train.csv").string() +
                                  " --label label --config " + (dir / "nas.json").string() +
                                  " --out-model " + (dir / "model2.cmnet").string() +
                                  " --report-dir " + (dir / "report2").string();
        const RunResult r2 = run_cli(args2, dir.path());
        CHECK(r2.exit_code == 0);
        CHECK(testutil::read_file(dir / "model.cmnet") ==
              testutil::read_file(dir / "model2.cmnet"));
        CHECK(testutil::read_file(dir / "report" / "widths.tsv") ==
              testutil::read_file(dir / "report2" / "widths.tsv"));
        CHECK(testutil::read_file(dir / "report" / "final_history.tsv") ==
              testutil::read_file(dir / "report2" / "final_history.tsv"));
        CHECK(testutil::read_file(dir / "report" / "final_history.svg") ==
              testutil::read_file(dir / "report2" / "final_history.svg"));
    }
}

TEST_CASE("nas rejects a missing label column and missing seed") {
    TempDir dir;
    write_sign_csv(dir / "train.csv", 24, 13);
    testutil::write_file(dir / "nas.json", nas_config_json(1, "0.9", 2, 1));

    const RunResult r = run_cli("nas --train " + (dir / "train.csv").string() +
                                    " --label not_there --config " + (dir / "nas.json").string() +
                                    " --out-model " + (dir / "m.cmnet").string() +
                                    " --report-dir " + (dir / "rep").string(),
                                dir.path());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("label column not found") != std::string::npos);

    std::string no_seed = nas_config_json(1, "0.9", 2, 1);
    no_seed.replace(no_seed.find("\"seed\":1,"), 9, "");
    testutil::write_file(dir / "noseed.json", no_seed);
    const RunResult r2 = run_cli("nas --train " + (dir / "train.csv").string() +
                                     " --label label --config " + (dir / "noseed.json").string() +
                                     " --out-model " + (dir / "m.cmnet").string() +
                                     " --report-dir " + (dir / "rep").string(),
                                 dir.path());
    CHECK(r2.exit_code == 2);
    CHECK(r2.output.find("seed") != std::string::npos);
}

TEST_CASE("report writes a confusion matrix for a stored model") {
    TempDir dir;
    // hand-written threshold-on-f0 model
    testutil::write_file(dir / "model.cmnet",
                         "cmnet 1\n"
                         "input_dim 2\n"
                         "seed 0\n"
                         "layers 1\n"
                         "layer units 1 activation sigmoid dropout 0 batch_norm 0 l2 0 "
                         "init he_normal\n"
                         "weights 2 1\n"
                         "10\n"
                         "0\n"
                         "bias 1\n"
                         "0\n"
                         "end\n");
    // the model classifies sign(f0); neg sorts before pos in first-appearance order
    testutil::write_file(dir / "eval.csv",
                         "f0,f1,label\n-2,0,neg\n-1,1,neg\n2,0,pos\n1,1,pos\n");

    const std::string args = "report --model " + (dir / "model.cmnet").string() + " --data " +
                             (dir / "eval.csv").string() + " --label label --out-dir " +
                             (dir / "rep").string();
    const RunResult r = run_cli(args, dir.path());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("2 (100.0%)") != std::string::npos);
    CHECK(r.output.find("accuracy: 1") != std::string::npos);
    CHECK(fs::exists(dir / "rep" / "confusion.txt"));
    CHECK(fs::exists(dir / "rep" / "confusion.svg"));

    // byte-identical on a second run
    const RunResult r2 = run_cli("report --model " + (dir / "model.cmnet").string() +
                                     " --data " + (dir / "eval.csv").string() +
                                     " --label label --out-dir " + (dir / "rep2").string(),
                                 dir.path());
    CHECK(r2.exit_code == 0);
    CHECK(testutil::read_file(dir / "rep" / "confusion.svg") ==
          testutil::read_file(dir / "rep2" / "confusion.svg"));

    // width mismatch is a validation error
    testutil::write_file(dir / "wide.csv", "a,b,c,label\n1,2,3,neg\n4,5,6,pos\n");
    const RunResult bad = run_cli("report --model " + (dir / "model.cmnet").string() +
                                      " --data " + (dir / "wide.csv").string() +
                                      " --label label --out-dir " + (dir / "rep3").string(),
                                  dir.path());
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("does not match model input") != std::string::npos);
}

TEST_CASE("report renders history curves when given a history file") {
    TempDir dir;
    testutil::write_file(dir / "model.cmnet",
                         "cmnet 1\ninput_dim 1\nseed 0\nlayers 1\n"
                         "layer units 1 activation sigmoid dropout 0 batch_norm 0 l2 0 "
                         "init he_normal\nweights 1 1\n5\nbias 1\n0\nend\n");
    testutil::write_file(dir / "eval.csv", "f0,label\n-1,a\n1,b\n");
    testutil::write_file(dir / "hist.tsv",
                         "epoch\taccuracy\tloss\tval_accuracy\tval_loss\n"
                         "1\t0.5\t0.9\t0.5\t1.0\n"
                         "2\t0.8\t0.5\t0.7\t0.6\n"
                         "# best_epoch\t2\n# stopped_early\t0\n");

    const RunResult r = run_cli("report --model " + (dir / "model.cmnet").string() +
                                    " --data " + (dir / "eval.csv").string() +
                                    " --label label --out-dir " + (dir / "rep").string() +
                                    " --history " + (dir / "hist.tsv").string(),
                                dir.path());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "rep" / "history.svg"));
    const std::string svg = testutil::read_file(dir / "rep" / "history.svg");
    CHECK(svg.find("min val_loss") != std::string::npos);
}
