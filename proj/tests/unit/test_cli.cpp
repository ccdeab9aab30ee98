#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stego/codec/latent_codec.hpp"
#include "stego/core/image.hpp"
#include "stego/message/message_codec.hpp"

using namespace stego;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, std::string* out = nullptr) {
    const fs::path capture = fs::temp_directory_path() / "stego_unit_cli_out.txt";
    const std::string cmd = std::string(STEGO_CLI) + " " + args + " > " + capture.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (out) {
        std::ifstream f(capture);
        std::stringstream ss;
        ss << f.rdbuf();
        *out = ss.str();
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli exit codes") {
    const fs::path dir = fs::temp_directory_path() / "stego_unit_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);

    CHECK(run_cli("") == 2);
    CHECK(run_cli("no-such-command") == 2);
    CHECK(run_cli("embed --image " + (dir / "missing.png").string() + " --message 00") == 2);
    CHECK(run_cli("make-dataset --count 3 --size 32x32 --out-dir " + (dir / "ds").string()) == 0);
    CHECK(fs::exists(dir / "ds" / "img_00002.png"));
    CHECK(run_cli("make-dataset --count 3 --size 30x32 --out-dir " + (dir / "bad").string()) == 2);

    RunConfig cfg;
    cfg.d = 8;
    cfg.encoder_width = 4;
    cfg.decoder_width = 4;
    const auto model = message::make_model(cfg, std::make_unique<codec::PoolingCodec>());
    message::save_model(model, dir / "model.ckpt");
    const std::string ck = " --checkpoint " + (dir / "model.ckpt").string();
    const std::string img = (dir / "ds" / "img_00000.png").string();

    CHECK(run_cli("embed" + ck + " --image " + img + " --message a5 --out " + (dir / "s.png").string()) == 0);
    CHECK(fs::exists(dir / "s.png"));
    std::string out;
    CHECK(run_cli("extract" + ck + " --image " + (dir / "s.png").string(), &out) == 0);
    CHECK(out.find("\"message\"") != std::string::npos);

    CHECK(run_cli("embed" + ck + " --image " + img + " --message a5a5 --out " + (dir / "t.png").string()) == 2);
    CHECK(run_cli("embed" + ck + " --image " + img + " --message zz --out " + (dir / "t.png").string()) == 2);
    CHECK(run_cli("embed" + ck + " --image " + (dir / "missing.png").string() + " --message a5 --out " +
                  (dir / "t.png").string()) == 3);
    CHECK(run_cli("extract --checkpoint " + (dir / "missing.ckpt").string() + " --image " + img) == 3);

    std::ofstream(dir / "bad.cfg") << "tau1 = 0.99\ntau2 = 0.5\n";
    CHECK(run_cli("--config " + (dir / "bad.cfg").string() + " evaluate" + ck + " --dataset " + (dir / "ds").string()) ==
          2);
    CHECK(run_cli("evaluate" + ck + " --dataset " + (dir / "ds").string() + " --out-dir " + (dir / "eval").string()) ==
          0);
    CHECK(fs::exists(dir / "eval" / "report.json"));
    CHECK(run_cli("robustness" + ck + " --dataset " + (dir / "ds").string() + " --out-dir " + (dir / "rob").string()) ==
          0);
    CHECK(run_cli("sweep --grid bogus=1 --out-dir " + (dir / "sw").string()) == 2);
    fs::remove_all(dir);
}
