"""KNN and RBF-SVM binary classifiers with min-max feature scaling."""
from .grid import GridSearchSpec, grid_search
from .knn import KnnModel, knn_fit, knn_predict
from .scaling import ScalingTransform, apply_scaler, fit_scaler
from .svm import SvmModel, load_model, save_model, svm_decision, svm_predict, svm_train

__all__ = [
    "GridSearchSpec", "grid_search", "KnnModel", "knn_fit", "knn_predict", "ScalingTransform",
    "apply_scaler", "fit_scaler", "SvmModel", "load_model", "save_model", "svm_decision",
    "svm_predict", "svm_train",
]
