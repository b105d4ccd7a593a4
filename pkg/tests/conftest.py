# Lets pytest collect and run the TestSlide DSL contexts in tests/*_test.py
import pytest
import testslide
from testslide.runner import BaseFormatter


class TestSlideModule(pytest.Module):
    def collect(self):
        before = list(testslide.Context.all_top_level_contexts)
        self.obj  # imports the module, registering its contexts
        contexts = [
            ctx
            for ctx in testslide.Context.all_top_level_contexts
            if not any(ctx is seen for seen in before)
        ]
        for ctx in contexts:
            for example in ctx.all_examples:
                yield TestSlideItem.from_parent(
                    self, name=example.full_name, example=example
                )


class TestSlideItem(pytest.Item):
    def __init__(self, *, example, **kwargs):
        super().__init__(**kwargs)
        self.example = example

    def runtest(self):
        formatter = BaseFormatter(import_module_names=[])
        try:
            testslide._ExampleRunner(self.example, formatter).run()
        except testslide.Skip:
            pytest.skip("skipped by TestSlide")

    def reportinfo(self):
        return self.path, None, self.name


def pytest_pycollect_makemodule(module_path, parent):
    if module_path.name.endswith("_test.py"):
        return TestSlideModule.from_parent(parent, path=module_path)
