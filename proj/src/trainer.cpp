#include "stegodetect/trainer.hpp"

#include <sstream>

namespace stegodetect {

std::string train_log_tsv(const TrainLog& log) {
    std::ostringstream out;
    for (const auto& e : log.epochs)
        out << e.epoch << "\t" << detail::format_sig9(e.train_loss) << "\t"
            << detail::format_sig9(e.val_acc) << "\t" << detail::format_sig9(e.val_precision)
            << "\t" << detail::format_sig9(e.val_recall) << "\t"
            << detail::format_sig9(e.val_f1) << "\n";
    return out.str();
}

}  // namespace stegodetect
