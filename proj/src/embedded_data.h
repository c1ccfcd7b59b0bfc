#ifndef SMARTREPLY_SRC_EMBEDDED_DATA_H_
#define SMARTREPLY_SRC_EMBEDDED_DATA_H_

// Shipped JSON defaults compiled into the library (generated from data/).
namespace smartreply::embedded {

const char* SyntheticIntentsJson();
const char* LexicalTablesJson();

}  // namespace smartreply::embedded

#endif  // SMARTREPLY_SRC_EMBEDDED_DATA_H_
