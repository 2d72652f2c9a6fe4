#include <exception>
#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Box-regression loss, OT matching, attention and evaluation utilities"};
    app.require_subcommand(1);
    auto code = std::make_shared<int>(0);
    mks::cli::register_loss_commands(app, code);
    mks::cli::register_match_commands(app, code);
    mks::cli::register_eval_commands(app, code);
    mks::cli::register_image_commands(app, code);
    mks::cli::register_tensor_commands(app, code);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        app.exit(e);
        return mks::cli::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mks::cli::kExitUsage;
    }
    return *code;
}
